"""Discrete probability containers and exact information measures.

Everything is measured in nats; presentation layers divide by log(2) if
they want bits. Tensors are dense and addressed by axis label, never by
position, so a transposed input cannot silently change a result.

Conventions: 0*log(0) = 0 and p*log(p/0) = +inf.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AxisError,
    DomainError,
    NormalizationError,
    SizeError,
)

LOG2 = math.log(2.0)

# input tolerance: renormalize below, hard error above
_NORM_TOL = 1e-9
# entries this far below zero are treated as float noise and clipped
_NEG_TOL = 1e-12
# dense tensors only; joints larger than this are out of scope
_MAX_CELLS = 10**7


@dataclass(frozen=True)
class Alphabet:
    """A finite alphabet with a short label such as "x" or "u"."""

    size: int
    label: str

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size < 1:
            raise DomainError(f"alphabet size must be a positive integer, got {self.size!r}")
        if not self.label:
            raise AxisError("alphabet label must be a nonempty string")


class JointPmf:
    """Dense joint pmf over an ordered tuple of labeled alphabets.

    The mass tensor is validated (nonnegative, total within 1e-9 of 1),
    renormalized to sum to 1, and frozen. Axes are addressed by label.
    """

    __slots__ = ("axes", "mass")

    def __init__(self, axes, mass):
        axes = tuple(axes)
        if not axes:
            raise AxisError("a JointPmf needs at least one axis")
        labels = [a.label for a in axes]
        if len(set(labels)) != len(labels):
            raise AxisError(f"duplicate axis labels: {labels}")
        mass = np.array(mass, dtype=np.float64)
        shape = tuple(a.size for a in axes)
        if mass.shape != shape:
            raise AxisError(f"mass shape {mass.shape} does not match axes {shape}")
        if mass.size > _MAX_CELLS:
            raise SizeError(f"joint has {mass.size} cells, cap is {_MAX_CELLS}")
        lo = float(mass.min())
        if lo < -_NEG_TOL:
            raise DomainError(f"negative probability mass {lo}")
        if lo < 0.0:
            mass = np.maximum(mass, 0.0)
        total = float(mass.sum())
        if not math.isfinite(total) or abs(total - 1.0) > _NORM_TOL:
            raise NormalizationError(f"total mass {total} deviates from 1 beyond {_NORM_TOL}")
        if total != 1.0:
            mass = mass / total
        mass.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "mass", mass)

    def __setattr__(self, name, value):
        raise AttributeError("JointPmf is immutable")

    @property
    def labels(self):
        return tuple(a.label for a in self.axes)

    def axis_index(self, label):
        for i, a in enumerate(self.axes):
            if a.label == label:
                return i
        raise AxisError(f"no axis labeled {label!r}; have {self.labels}")

    def alphabet(self, label):
        return self.axes[self.axis_index(label)]

    def __repr__(self):
        return f"JointPmf(labels={self.labels}, shape={self.mass.shape})"


class Channel:
    """Row-stochastic conditional pmf p(output | input)."""

    __slots__ = ("input", "output", "rows")

    def __init__(self, input, output, rows):
        rows = np.array(rows, dtype=np.float64)
        if rows.shape != (input.size, output.size):
            raise AxisError(
                f"rows shape {rows.shape} does not match ({input.size}, {output.size})"
            )
        lo = float(rows.min())
        if lo < -_NEG_TOL:
            raise DomainError(f"negative channel entry {lo}")
        if lo < 0.0:
            rows = np.maximum(rows, 0.0)
        sums = rows.sum(axis=1)
        if not np.all(np.isfinite(sums)) or float(np.abs(sums - 1.0).max()) > _NORM_TOL:
            raise NormalizationError(f"channel row sums {sums} deviate from 1 beyond {_NORM_TOL}")
        if not np.all(sums == 1.0):
            rows = rows / sums[:, None]
        rows.setflags(write=False)
        object.__setattr__(self, "input", input)
        object.__setattr__(self, "output", output)
        object.__setattr__(self, "rows", rows)

    def __setattr__(self, name, value):
        raise AttributeError("Channel is immutable")

    def __repr__(self):
        return f"Channel({self.input.label}->{self.output.label}, shape={self.rows.shape})"


def _clamp_measure(value):
    # information measures are >= 0; absorb -1e-12-scale float noise only
    if -_NEG_TOL <= value < 0.0:
        return 0.0
    return value


def entropy(p):
    """Shannon entropy of a JointPmf in nats, with 0*log(0) = 0."""
    m = p.mass.ravel()
    m = m[m > 0.0]
    return _clamp_measure(-float(np.sum(m * np.log(m))))


def entropy_of_array(mass):
    """Entropy of a raw nonnegative array that already sums to 1."""
    m = np.asarray(mass, dtype=np.float64).ravel()
    m = m[m > 0.0]
    return _clamp_measure(-float(np.sum(m * np.log(m))))


def binary_entropy(p):
    """h_b(p) = -p log p - (1-p) log(1-p) in nats."""
    p = _check_probability(p, "binary_entropy")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -(p * math.log(p) + (1.0 - p) * math.log1p(-p))


def binary_entropy_inverse(h):
    """The unique p in [0, 1/2] with binary_entropy(p) = h.

    Bisection to interval width 1e-14; h must lie in [0, log 2].
    """
    if not isinstance(h, (int, float)) or not math.isfinite(h):
        raise DomainError(f"binary_entropy_inverse needs a finite real, got {h!r}")
    if h < -_NEG_TOL or h > LOG2 + _NEG_TOL:
        raise DomainError(f"binary_entropy_inverse argument {h} outside [0, log 2]")
    if h <= 0.0:
        return 0.0
    if h >= LOG2:
        return 0.5
    lo, hi = 0.0, 0.5
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < h:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def binary_convolution(a, b):
    """a * b = a(1-b) + (1-a)b, the crossover of two cascaded BSCs."""
    a = _check_probability(a, "binary_convolution")
    b = _check_probability(b, "binary_convolution")
    return a * (1.0 - b) + (1.0 - a) * b


def _check_probability(p, who):
    if not isinstance(p, (int, float)) or not math.isfinite(p):
        raise DomainError(f"{who} needs a finite real in [0,1], got {p!r}")
    p = float(p)
    if p < -_NEG_TOL or p > 1.0 + _NEG_TOL:
        raise DomainError(f"{who} argument {p} outside [0,1]")
    return min(max(p, 0.0), 1.0)


def _as_labels(group):
    if isinstance(group, str):
        return (group,)
    return tuple(group)


def marginalize(p, keep):
    """Sum out every axis not in `keep`; kept axes stay in p's order."""
    keep = _as_labels(keep)
    if not keep:
        raise AxisError("marginalize needs at least one axis to keep")
    if len(set(keep)) != len(keep):
        raise AxisError(f"duplicate labels in keep: {keep}")
    idx = {p.axis_index(lbl) for lbl in keep}
    drop = tuple(i for i in range(len(p.axes)) if i not in idx)
    if not drop:
        return p
    new_axes = tuple(a for i, a in enumerate(p.axes) if i not in drop)
    return JointPmf(new_axes, p.mass.sum(axis=drop))


def mutual_information(p, group_a, group_b):
    """I(A;B) = H(A) + H(B) - H(A,B) in nats."""
    ga, gb = _as_labels(group_a), _as_labels(group_b)
    _check_groups_disjoint(p, ga, gb)
    ha = entropy(marginalize(p, ga))
    hb_ = entropy(marginalize(p, gb))
    hab = entropy(marginalize(p, ga + gb))
    return _clamp_measure(ha + hb_ - hab)


def conditional_mutual_information(p, group_a, group_b, group_c):
    """I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C); empty C gives I(A;B)."""
    ga, gb, gc = _as_labels(group_a), _as_labels(group_b), _as_labels(group_c)
    if not gc:
        return mutual_information(p, ga, gb)
    _check_groups_disjoint(p, ga, gb, gc)
    hac = entropy(marginalize(p, ga + gc))
    hbc = entropy(marginalize(p, gb + gc))
    habc = entropy(marginalize(p, ga + gb + gc))
    hc = entropy(marginalize(p, gc))
    return _clamp_measure(hac + hbc - habc - hc)


def _check_groups_disjoint(p, *groups):
    seen = set()
    for g in groups:
        if not g:
            raise AxisError("axis group must be nonempty")
        for lbl in g:
            p.axis_index(lbl)
            if lbl in seen:
                raise AxisError(f"axis {lbl!r} appears in more than one group")
            seen.add(lbl)


def kl_divergence(p, q):
    """D(p || q) in nats; +inf when q lacks support where p has mass."""
    if set(p.labels) != set(q.labels):
        raise AxisError(f"axis label sets differ: {p.labels} vs {q.labels}")
    order = [q.axis_index(lbl) for lbl in p.labels]
    qm = np.transpose(q.mass, order)
    if qm.shape != p.mass.shape:
        raise AxisError(f"axis sizes differ: {p.mass.shape} vs {qm.shape}")
    pm = p.mass.ravel()
    qm = qm.ravel()
    pos = pm > 0.0
    if np.any(qm[pos] == 0.0):
        return math.inf
    pm, qm = pm[pos], qm[pos]
    return _clamp_measure(float(np.sum(pm * np.log(pm / qm))))


def dsbs(p):
    """Doubly symmetric binary source: fair x, z = x xor Bernoulli(p)."""
    p = _check_probability(p, "dsbs")
    same = (1.0 - p) / 2.0
    diff = p / 2.0
    return JointPmf(
        (Alphabet(2, "x"), Alphabet(2, "z")),
        [[same, diff], [diff, same]],
    )


def bsc_channel(alpha, input_label="x", output_label="u"):
    """Binary symmetric channel with crossover alpha."""
    alpha = _check_probability(alpha, "bsc_channel")
    return Channel(
        Alphabet(2, input_label),
        Alphabet(2, output_label),
        [[1.0 - alpha, alpha], [alpha, 1.0 - alpha]],
    )


def _check_channel_on(ch, alphabet, who):
    if ch.input.label != alphabet.label or ch.input.size != alphabet.size:
        raise AxisError(
            f"{who}: channel input {ch.input.label!r}({ch.input.size}) "
            f"does not match axis {alphabet.label!r}({alphabet.size})"
        )


def compose_markov(p_xz, ch_u=None, ch_v=None, mixing=None):
    """Build the long-Markov-chain joint u - x - z - v from a source and test channels.

    Either pass ch_u and ch_v, or pass mixing = [(weight, ch_u, ch_v), ...]
    (at most 3 branches) to add a time-sharing axis labeled "q". The output
    axes are (u, x, z, v) or (u, x, z, v, q).
    """
    if len(p_xz.axes) != 2:
        raise AxisError(f"compose_markov needs a two-axis source, got {p_xz.labels}")
    ax_x, ax_z = p_xz.axes
    if mixing is None:
        if ch_u is None or ch_v is None:
            raise AxisError("compose_markov needs ch_u and ch_v (or mixing)")
        _check_channel_on(ch_u, ax_x, "compose_markov")
        _check_channel_on(ch_v, ax_z, "compose_markov")
        _check_output_labels(p_xz, ch_u, ch_v)
        mass = _chain_mass(p_xz.mass, ch_u.rows, ch_v.rows)
        axes = (ch_u.output, ax_x, ax_z, ch_v.output)
        return JointPmf(axes, mass)

    if ch_u is not None or ch_v is not None:
        raise AxisError("pass either (ch_u, ch_v) or mixing, not both")
    branches = list(mixing)
    if not 1 <= len(branches) <= 3:
        raise DomainError(f"time-sharing supports 1..3 branches, got {len(branches)}")
    weights = np.array([w for w, _, _ in branches], dtype=np.float64)
    if float(weights.min()) < -_NEG_TOL:
        raise DomainError(f"negative mixing weight {weights.min()}")
    weights = np.maximum(weights, 0.0)
    wsum = float(weights.sum())
    if abs(wsum - 1.0) > _NORM_TOL:
        raise NormalizationError(f"mixing weights sum to {wsum}")
    weights = weights / wsum
    u0, v0 = branches[0][1].output, branches[0][2].output
    slices = []
    for w, cu, cv in branches:
        _check_channel_on(cu, ax_x, "compose_markov")
        _check_channel_on(cv, ax_z, "compose_markov")
        if (cu.output.label, cu.output.size) != (u0.label, u0.size):
            raise AxisError("all mixing branches must share the u alphabet")
        if (cv.output.label, cv.output.size) != (v0.label, v0.size):
            raise AxisError("all mixing branches must share the v alphabet")
        slices.append(_chain_mass(p_xz.mass, cu.rows, cv.rows))
    _check_output_labels(p_xz, branches[0][1], branches[0][2], extra="q")
    mass = np.stack(slices, axis=-1) * weights
    axes = (u0, ax_x, ax_z, v0, Alphabet(len(branches), "q"))
    return JointPmf(axes, mass)


def _check_output_labels(p_xz, ch_u, ch_v, extra=None):
    labels = list(p_xz.labels) + [ch_u.output.label, ch_v.output.label]
    if extra is not None:
        labels.append(extra)
    if len(set(labels)) != len(labels):
        raise AxisError(f"axis labels must be unique, got {labels}")


def _chain_mass(pxz, rows_u, rows_v):
    # out[u,x,z,v] = p(x,z) * p(u|x) * p(v|z); plain broadcasting, no BLAS
    t = rows_u.T[:, :, None, None] * pxz[None, :, :, None]
    return t * rows_v[None, None, :, :]
