"""Region-point evaluators for the biclustering bounds.

Two-source inner and outer evaluators, their multi-source
generalizations (with binning subset search), the CEO specialization
under a mutual-information constraint, and log-loss decoders.

Index sets for the multi-source evaluators use 1-based encoder indices.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AxisError,
    ConstraintError,
    DomainError,
    NormalizationError,
    SizeError,
    SupportError,
)
from .probability import (
    LOG2,
    JointPmf,
    binary_convolution,
    binary_entropy,
    compose_markov,
    conditional_mutual_information,
    entropy_of_array,
    marginalize,
    mutual_information,
    _check_probability,
)

# a Markov chain is accepted when the relevant CMI is at most this
MARKOV_TOL = 1e-9
# slack allowed on the mu <= min(r1, r2) consequence
_POINT_TOL = 1e-9


@dataclass(frozen=True)
class RegionPoint:
    """A (mu, r1, r2) triple in nats."""

    mu: float
    r1: float
    r2: float

    def __post_init__(self):
        for name in ("mu", "r1", "r2"):
            if not math.isfinite(getattr(self, name)):
                raise ConstraintError(f"RegionPoint.{name} must be finite")
        if self.mu > min(self.r1, self.r2) + _POINT_TOL:
            raise ConstraintError(
                f"mu={self.mu} exceeds min(r1, r2)={min(self.r1, self.r2)}"
            )


@dataclass(frozen=True)
class SubsetPair:
    """An (A, B) pair of nonempty index sets."""

    a: frozenset
    b: frozenset

    def __post_init__(self):
        object.__setattr__(self, "a", frozenset(self.a))
        object.__setattr__(self, "b", frozenset(self.b))
        if not self.a or not self.b:
            raise ConstraintError("SubsetPair sets must be nonempty")

    @property
    def disjoint(self):
        return not (self.a & self.b)

    def __repr__(self):
        return f"SubsetPair({sorted(self.a)}, {sorted(self.b)})"


def omega_pairs(k):
    """All ordered pairs of disjoint nonempty subsets of {1..k}.

    Deterministic order: A by (size, sorted tuple), then B likewise over
    the complement. The count is 3^k - 2^(k+1) + 1.
    """
    universe = tuple(range(1, k + 1))
    out = []
    for a in _subsets_by_size_asc(universe):
        rest = tuple(i for i in universe if i not in a)
        for b in _subsets_by_size_asc(rest):
            out.append(SubsetPair(frozenset(a), frozenset(b)))
    return out


def _subsets_by_size_asc(items):
    items = sorted(items)
    for r in range(1, len(items) + 1):
        yield from itertools.combinations(items, r)


@dataclass(frozen=True)
class MultiRegionPoint:
    """Per-pair mu values plus the rate vector, all in nats."""

    mu: dict
    rates: tuple

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "mu", dict(self.mu))
        for pair in self.mu:
            if not isinstance(pair, SubsetPair):
                raise ConstraintError(f"mu key {pair!r} is not a SubsetPair")
        if self.mu and all(p.disjoint for p in self.mu):
            k = len(self.rates)
            cap = 3**k - 2 ** (k + 1) + 1
            if len(self.mu) > cap:
                raise ConstraintError(
                    f"{len(self.mu)} disjoint pairs exceeds the {cap} possible for K={k}"
                )


@dataclass(frozen=True)
class BinningChoice:
    """Binning subsets A_b <= A_a <= A (and likewise for B) for one pair."""

    a_active: frozenset
    a_bin: frozenset
    b_active: frozenset
    b_bin: frozenset

    def __post_init__(self):
        for name in ("a_active", "a_bin", "b_active", "b_bin"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if not (self.a_bin and self.b_bin):
            raise ConstraintError("binning subsets must be nonempty")
        if not self.a_bin <= self.a_active:
            raise ConstraintError(
                f"a_bin {sorted(self.a_bin)} not within a_active {sorted(self.a_active)}"
            )
        if not self.b_bin <= self.b_active:
            raise ConstraintError(
                f"b_bin {sorted(self.b_bin)} not within b_active {sorted(self.b_active)}"
            )

    def check_within(self, pair):
        if not self.a_active <= pair.a:
            raise ConstraintError(
                f"a_active {sorted(self.a_active)} not within A {sorted(pair.a)}"
            )
        if not self.b_active <= pair.b:
            raise ConstraintError(
                f"b_active {sorted(self.b_active)} not within B {sorted(pair.b)}"
            )


class Decoder:
    """Probabilistic reconstruction: one pmf over y outcomes per u outcome.

    Rows are indexed by the flattened u outcome (C order over the u labels
    as passed to log_loss_fidelity), columns by the flattened y outcome.
    Zero entries are allowed; they only fail later if an outcome with
    positive probability lands on one.
    """

    __slots__ = ("table",)

    def __init__(self, table):
        table = np.array(table, dtype=np.float64)
        if table.ndim != 2:
            raise AxisError(f"decoder table must be 2-D, got shape {table.shape}")
        lo = float(table.min())
        if lo < -1e-12:
            raise DomainError(f"negative decoder mass {lo}")
        if lo < 0.0:
            table = np.maximum(table, 0.0)
        sums = table.sum(axis=1)
        if not np.all(np.isfinite(sums)) or float(np.abs(sums - 1.0).max()) > 1e-9:
            raise NormalizationError(f"decoder row sums {sums} deviate from 1")
        if not np.all(sums == 1.0):
            table = table / sums[:, None]
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    def __setattr__(self, name, value):
        raise AttributeError("Decoder is immutable")

    def __repr__(self):
        return f"Decoder(shape={self.table.shape})"


# ---------------------------------------------------------------------------
# two-source evaluators


def inner_point(p_xz, ch_u, ch_v):
    """(mu, r1, r2) = (I(u;v), I(u;x), I(v;z)) on the long chain u-x-z-v."""
    j = compose_markov(p_xz, ch_u, ch_v)
    u, x, z, v = j.labels
    return RegionPoint(
        mu=mutual_information(j, u, v),
        r1=mutual_information(j, u, x),
        r2=mutual_information(j, v, z),
    )


def sb_point(p, alpha, beta):
    """Closed-form boundary point for the symmetric binary source.

    (log2 - h_b(alpha*p*beta), log2 - h_b(alpha), log2 - h_b(beta)) with
    * the binary convolution; matches inner_point with BSC test channels.
    """
    vals = {}
    for name, val in (("p", p), ("alpha", alpha), ("beta", beta)):
        v = _check_probability(val, "sb_point")
        if v > 0.5:
            raise DomainError(f"sb_point {name}={val} outside [0, 1/2]")
        vals[name] = v
    eff = binary_convolution(
        binary_convolution(vals["alpha"], vals["p"]), vals["beta"]
    )
    return RegionPoint(
        mu=LOG2 - binary_entropy(eff),
        r1=LOG2 - binary_entropy(vals["alpha"]),
        r2=LOG2 - binary_entropy(vals["beta"]),
    )


def _check_short_chains(p, u, x, z, v, markov_tol):
    c1 = conditional_mutual_information(p, u, z, x)
    if c1 > markov_tol:
        raise ConstraintError(
            f"Markov chain {u}-{x}-{z} violated: I({u};{z}|{x}) = {c1:.6e}"
        )
    c2 = conditional_mutual_information(p, v, x, z)
    if c2 > markov_tol:
        raise ConstraintError(
            f"Markov chain {x}-{z}-{v} violated: I({v};{x}|{z}) = {c2:.6e}"
        )


def outer_point_ro(p, u="u", x="x", z="z", v="v", markov_tol=MARKOV_TOL):
    """Outer bound with the three-term mu = I(v;z) + I(u;x) - I(uv;xz).

    Requires the two short chains u-x-z and x-z-v within markov_tol.
    The raw mu is reported unclamped (it may dip below zero).
    """
    _check_short_chains(p, u, x, z, v, markov_tol)
    r1 = mutual_information(p, u, x)
    r2 = mutual_information(p, v, z)
    iuv_xz = mutual_information(p, (u, v), (x, z))
    return RegionPoint(mu=r2 + r1 - iuv_xz, r1=r1, r2=r2)


def outer_point_ro_prime(p, u="u", x="x", z="z", v="v", markov_tol=MARKOV_TOL):
    """Outer bound with mu = min(I(u;z), I(v;x)); never below the ro mu."""
    _check_short_chains(p, u, x, z, v, markov_tol)
    return RegionPoint(
        mu=min(mutual_information(p, u, z), mutual_information(p, v, x)),
        r1=mutual_information(p, u, x),
        r2=mutual_information(p, v, z),
    )


# ---------------------------------------------------------------------------
# multi-source evaluators


def attach_channels(p, channels, source_labels=None):
    """Joint over (u_1..u_K, original axes) from per-source test channels.

    Channel k feeds on source_labels[k] (default: the first K axes of p);
    by construction each output is conditionally independent of everything
    else given its own source.
    """
    channels = list(channels)
    if source_labels is None:
        source_labels = p.labels[: len(channels)]
    source_labels = tuple(source_labels)
    if len(source_labels) != len(channels):
        raise AxisError("one source label per channel required")
    out_labels = [ch.output.label for ch in channels]
    all_labels = out_labels + list(p.labels)
    if len(set(all_labels)) != len(all_labels):
        raise AxisError(f"axis labels must be unique, got {all_labels}")
    letters = "abcdefghijklmnopqrstuvwxyz"
    n_ax = len(p.axes)
    if n_ax + len(channels) > len(letters):
        raise SizeError("too many axes to label")
    src = {lbl: letters[i] for i, lbl in enumerate(p.labels)}
    operands = [p.mass]
    subs = [letters[:n_ax]]
    out_letters = []
    for k, (ch, lbl) in enumerate(zip(channels, source_labels)):
        ax = p.alphabet(lbl)
        if ch.input.label != ax.label or ch.input.size != ax.size:
            raise AxisError(
                f"channel {k + 1} input {ch.input.label!r}({ch.input.size}) "
                f"does not match source {ax.label!r}({ax.size})"
            )
        new = letters[n_ax + k]
        operands.append(ch.rows)
        subs.append(src[lbl] + new)
        out_letters.append(new)
    spec = ",".join(subs) + "->" + "".join(out_letters) + letters[:n_ax]
    mass = np.einsum(spec, *operands, optimize=False)
    axes = tuple(ch.output for ch in channels) + p.axes
    return JointPmf(axes, mass)


def _labels_for(labels, idx_set):
    return tuple(labels[i - 1] for i in sorted(idx_set))


def _check_multi_markov(p, u_labels, x_labels, markov_tol):
    k = len(u_labels)
    if k <= 4:
        subsets = [
            s for r in range(1, k) for s in itertools.combinations(range(1, k + 1), r)
        ]
    else:
        # singleton checks catch product-channel violations; larger proper
        # subsets are skipped for cost and the full set is vacuous anyway
        subsets = [(i,) for i in range(1, k + 1)]
    for a in subsets:
        rest = tuple(i for i in range(1, k + 1) if i not in a)
        if not rest:
            continue
        c = conditional_mutual_information(
            p,
            _labels_for(u_labels, a),
            _labels_for(x_labels, rest),
            _labels_for(x_labels, a),
        )
        if c > markov_tol:
            raise ConstraintError(
                f"Markov chain u_A - x_A - x_rest violated for A={sorted(a)}: CMI = {c:.6e}"
            )


def multi_outer_point_ro_prime(p, u_labels, x_labels, markov_tol=MARKOV_TOL):
    """mu[A,B] = I(u_A; x_B) over all disjoint pairs; rates I(u_k; x_k)."""
    u_labels, x_labels = tuple(u_labels), tuple(x_labels)
    k = len(u_labels)
    if len(x_labels) != k:
        raise AxisError("u_labels and x_labels must have equal length")
    _check_multi_markov(p, u_labels, x_labels, markov_tol)
    mu = {}
    for pair in omega_pairs(k):
        mu[pair] = mutual_information(
            p, _labels_for(u_labels, pair.a), _labels_for(x_labels, pair.b)
        )
    rates = tuple(mutual_information(p, u_labels[i], x_labels[i]) for i in range(k))
    return MultiRegionPoint(mu=mu, rates=rates)


def multi_outer_point_ro(p, u_labels, x_labels, markov_tol=MARKOV_TOL):
    """Three-term mu[A,B] = I(u_A;x_A) + I(u_B;x_B) - I(u_AB;x_AB)."""
    u_labels, x_labels = tuple(u_labels), tuple(x_labels)
    k = len(u_labels)
    if len(x_labels) != k:
        raise AxisError("u_labels and x_labels must have equal length")
    _check_multi_markov(p, u_labels, x_labels, markov_tol)
    mu = {}
    for pair in omega_pairs(k):
        ua, xa = _labels_for(u_labels, pair.a), _labels_for(x_labels, pair.a)
        ub, xb = _labels_for(u_labels, pair.b), _labels_for(x_labels, pair.b)
        both = pair.a | pair.b
        uab, xab = _labels_for(u_labels, both), _labels_for(x_labels, both)
        mu[pair] = (
            mutual_information(p, ua, xa)
            + mutual_information(p, ub, xb)
            - mutual_information(p, uab, xab)
        )
    rates = tuple(mutual_information(p, u_labels[i], x_labels[i]) for i in range(k))
    return MultiRegionPoint(mu=mu, rates=rates)


def _side_constraints(joint, rates, u_labels, x_labels, active, binned, side):
    """Yield (description, slack) for one side's rate-sum constraints."""
    active = sorted(active)
    for r in range(1, len(active) + 1):
        for sub in itertools.combinations(active, r):
            if not (set(sub) & binned):
                continue
            helpers = tuple(i for i in active if i not in sub)
            need = conditional_mutual_information(
                joint,
                _labels_for(x_labels, sub),
                _labels_for(u_labels, sub),
                _labels_for(u_labels, helpers),
            )
            have = sum(rates[i - 1] for i in sub)
            yield (
                f"sum of R_k over {side}'={sorted(sub)} >= {need:.6g}",
                have - need,
            )


def multi_inner_membership(p_xk, channels, point, choice, tol=MARKOV_TOL):
    """Check the quantize-and-bin constraints under given binning choices.

    `choice` maps each pair in point.mu to a BinningChoice. Returns
    (ok, certificate) where certificate maps each pair to its binding
    (minimum-slack) constraint description and slack in nats.
    """
    channels = list(channels)
    x_labels = p_xk.labels[: len(channels)]
    joint = attach_channels(p_xk, channels, x_labels)
    u_labels = tuple(ch.output.label for ch in channels)
    rates = point.rates
    if len(rates) != len(channels):
        raise ConstraintError(f"{len(rates)} rates for {len(channels)} encoders")
    ok = True
    certificate = {}
    for pair, target in point.mu.items():
        bc = choice.get(pair)
        if bc is None:
            raise ConstraintError(f"no binning choice for pair {pair!r}")
        bc.check_within(pair)
        worst = ("", math.inf)
        for desc, slack in _side_constraints(
            joint, rates, u_labels, x_labels, bc.a_active, bc.a_bin, "A"
        ):
            if slack < worst[1]:
                worst = (desc, slack)
        for desc, slack in _side_constraints(
            joint, rates, u_labels, x_labels, bc.b_active, bc.b_bin, "B"
        ):
            if slack < worst[1]:
                worst = (desc, slack)
        cap = mutual_information(
            joint, _labels_for(u_labels, bc.a_bin), _labels_for(u_labels, bc.b_bin)
        )
        if cap - target < worst[1]:
            worst = (f"mu <= I(u_Ab; u_Bb) = {cap:.6g}", cap - target)
        certificate[pair] = worst
        if worst[1] < -tol:
            ok = False
    return ok, certificate


def _binning_candidates(universe):
    """(active, binned) pairs ordered by |active| desc, |binned| desc, lex."""
    items = sorted(universe)
    for ra in range(len(items), 0, -1):
        for active in itertools.combinations(items, ra):
            for rb in range(ra, 0, -1):
                for binned in itertools.combinations(active, rb):
                    yield frozenset(active), frozenset(binned)


def multi_inner_search(p_xk, channels, point, tol=MARKOV_TOL):
    """First satisfying BinningChoice per pair in the documented order.

    Candidates run through (a_active, a_bin) by size-descending then
    lexicographic order, with the B side iterated innermost. Returns
    {pair: BinningChoice}, or None if any pair has no satisfying choice.
    Guarded to K <= 6 encoders.
    """
    channels = list(channels)
    if len(channels) > 6:
        raise SizeError(f"multi_inner_search supports K <= 6, got {len(channels)}")
    choices = {}
    for pair in point.mu:
        single = MultiRegionPoint({pair: point.mu[pair]}, point.rates)
        found = None
        for a_act, a_bin in _binning_candidates(pair.a):
            for b_act, b_bin in _binning_candidates(pair.b):
                bc = BinningChoice(a_act, a_bin, b_act, b_bin)
                ok, _ = multi_inner_membership(p_xk, channels, single, {pair: bc}, tol)
                if ok:
                    found = bc
                    break
            if found is not None:
                break
        if found is None:
            return None
        choices[pair] = found
    return choices


# ---------------------------------------------------------------------------
# CEO / information bottleneck


def ceo_point(p, channels, x_labels, y_labels):
    """CEO evaluation under the mutual-information constraint.

    Encoders observe the x_labels axes through their channels; the
    y_labels axes are the unobserved targets. Returns rates I(u_j; x_j)
    and mu[A,B] = I(u_A; y_B) for every pair of nonempty subsets, with A
    drawn from encoders and B from targets (indices overlap freely since
    the two sides live in different namespaces).
    """
    x_labels, y_labels = tuple(x_labels), tuple(y_labels)
    channels = list(channels)
    if len(channels) != len(x_labels):
        raise AxisError("one channel per encoder label required")
    joint = attach_channels(p, channels, x_labels)
    u_labels = tuple(ch.output.label for ch in channels)
    jj, ll = len(x_labels), len(y_labels)
    mu = {}
    for a in _subsets_by_size_asc(range(1, jj + 1)):
        for b in _subsets_by_size_asc(range(1, ll + 1)):
            mu[SubsetPair(frozenset(a), frozenset(b))] = mutual_information(
                joint, _labels_for(u_labels, a), _labels_for(y_labels, b)
            )
    assert len(mu) == (2**jj - 1) * (2**ll - 1)
    rates = tuple(mutual_information(joint, u_labels[i], x_labels[i]) for i in range(jj))
    return MultiRegionPoint(mu=mu, rates=rates)


def ib_point(p_xz, ch_u):
    """(rate, relevance) = (I(u;x), I(u;z)) under the chain u - x - z.

    This is the single-encoder single-target CEO evaluation, unpacked.
    """
    if len(p_xz.axes) != 2:
        raise AxisError(f"ib_point needs a two-axis source, got {p_xz.labels}")
    mp_ = ceo_point(p_xz, [ch_u], (p_xz.labels[0],), (p_xz.labels[1],))
    pair = SubsetPair(frozenset({1}), frozenset({1}))
    return mp_.rates[0], mp_.mu[pair]


# ---------------------------------------------------------------------------
# log-loss fidelity


def _grouped_matrix(p, row_labels, col_labels):
    marg = marginalize(p, tuple(row_labels) + tuple(col_labels))
    perm = [marg.axis_index(l) for l in tuple(row_labels) + tuple(col_labels)]
    t = np.transpose(marg.mass, perm)
    nrow = 1
    for l in row_labels:
        nrow *= p.alphabet(l).size
    return t.reshape(nrow, -1)


def log_loss_fidelity(p, decoder, n=1, u_labels=("u",), y_labels=("y",)):
    """Expected log-loss fidelity H(y) - E[-(1/n) log g(y|u)] in nats.

    Never exceeds (1/n) I(y;u); equality holds for the posterior decoder.
    Blocks of n letters are expressed through product alphabets, in which
    case H(y) above is the per-letter entropy of the block.
    """
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"blocklength must be a positive integer, got {n!r}")
    w = _grouped_matrix(p, u_labels, y_labels)
    if decoder.table.shape != w.shape:
        raise AxisError(
            f"decoder table shape {decoder.table.shape} does not match joint {w.shape}"
        )
    h_y = entropy_of_array(np.sum(w, axis=0))
    rows, cols = np.nonzero(w > 0.0)
    g = decoder.table[rows, cols]
    if np.any(g == 0.0):
        i = int(np.argmax(g == 0.0))
        raise SupportError(
            f"decoder assigns zero mass to y-index {cols[i]} under u-index {rows[i]} "
            "which has positive probability"
        )
    cross = float(np.sum(w[rows, cols] * np.log(g)))
    fidelity = (h_y + cross) / n
    h_u = entropy_of_array(np.sum(w, axis=1))
    mi = h_u + h_y - entropy_of_array(w)
    assert fidelity <= mi / n + 1e-12, "log-loss fidelity exceeded the MI bound"
    return fidelity


def optimal_posterior_decoder(p, u_labels=("u",), y_labels=("y",)):
    """The decoder g(y|u) = p(y|u); achieves fidelity = (1/n) I(y;u)."""
    w = _grouped_matrix(p, u_labels, y_labels)
    sums = np.sum(w, axis=1)
    table = np.empty_like(w)
    for i, s in enumerate(sums):
        if s > 0.0:
            table[i] = w[i] / s
        else:
            # never observed; any pmf works, uniform keeps it explicit
            table[i] = 1.0 / w.shape[1]
    return Decoder(table)
