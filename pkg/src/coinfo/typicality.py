"""Method-of-types machinery and the exhaustive small-blocklength oracle.

Types and robustly typical sets over finite alphabets, the exact
sequence-probability identity, the per-letter co-information of a code
pair, and brute-force search over label-canonical code pairs.

Sequences are tuples of symbol indices; a block x_1..x_n maps to the
integer sum x_t * |X|^(n-1-t) (first letter most significant), which is
also the ordering produced by iterated Kronecker products.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SizeError, SupportError
from .probability import Alphabet, JointPmf, entropy_of_array, mutual_information

_STATE_GUARD = 10**7
_CODE_GUARD = 10**8


@dataclass(frozen=True)
class TypeClass:
    """Empirical symbol counts of a length-n block."""

    counts: tuple
    n: int

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts:
            raise SizeError("a TypeClass needs at least one symbol slot")
        if any(c < 0 for c in counts):
            raise DomainError(f"counts must be nonnegative, got {counts}")
        if not isinstance(self.n, int) or self.n < 1:
            raise DomainError(f"blocklength must be a positive integer, got {self.n!r}")
        if sum(counts) != self.n:
            raise DomainError(f"counts {counts} do not sum to the blocklength {self.n}")
        object.__setattr__(self, "counts", counts)

    @property
    def pmf(self):
        return np.array(self.counts, dtype=float) / self.n

    def sequence_count(self):
        """Number of blocks with this type (exact multinomial integer)."""
        total = math.factorial(self.n)
        for c in self.counts:
            total //= math.factorial(c)
        return total


@dataclass(frozen=True)
class CodeSpec:
    """A pair of total lookup tables indexing blocks to bin labels 0..m-1."""

    n: int
    f: tuple
    g: tuple
    m1: int
    m2: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise DomainError(f"blocklength must be a positive integer, got {self.n!r}")
        for name in ("m1", "m2"):
            m = getattr(self, name)
            if not isinstance(m, int) or m < 1:
                raise DomainError(f"{name} must be a positive integer, got {m!r}")
        f = tuple(int(v) for v in self.f)
        g = tuple(int(v) for v in self.g)
        if not f or not g:
            raise SizeError("lookup tables must be total (nonempty)")
        if any(not 0 <= v < self.m1 for v in f):
            raise DomainError(f"f values must lie in [0, {self.m1})")
        if any(not 0 <= v < self.m2 for v in g):
            raise DomainError(f"g values must lie in [0, {self.m2})")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)


def type_of(seq, alphabet_size):
    """Empirical type of a symbol sequence."""
    seq = tuple(int(s) for s in seq)
    if not seq:
        raise SizeError("type_of needs a nonempty sequence")
    if not isinstance(alphabet_size, int) or alphabet_size < 1:
        raise DomainError(f"alphabet_size must be >= 1, got {alphabet_size!r}")
    counts = [0] * alphabet_size
    for s in seq:
        if not 0 <= s < alphabet_size:
            raise DomainError(f"symbol {s} outside alphabet of size {alphabet_size}")
        counts[s] += 1
    return TypeClass(tuple(counts), len(seq))


def enumerate_types(alphabet_size, n):
    """All types of length-n blocks, first count descending."""
    if not isinstance(alphabet_size, int) or alphabet_size < 1:
        raise DomainError(f"alphabet_size must be >= 1, got {alphabet_size!r}")
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n!r}")
    total = math.comb(n + alphabet_size - 1, alphabet_size - 1)
    if total > _CODE_GUARD:
        raise SizeError(
            f"{total} types of {alphabet_size}-ary length-{n} blocks exceed the "
            f"enumeration budget {_CODE_GUARD}"
        )
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(TypeClass(prefix + (remaining,), n))
            return
        for c in range(remaining, -1, -1):
            rec(prefix + (c,), remaining - c, slots - 1)

    rec((), n, alphabet_size)
    return out


def _check_pmf_vector(p):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise DomainError("pmf must be a nonempty vector")
    if np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise DomainError("pmf entries must be finite and nonnegative")
    if abs(float(np.sum(p)) - 1.0) > 1e-9:
        raise DomainError(f"pmf sums to {float(np.sum(p))}, expected 1")
    return p


def _type_is_typical(counts, n, p, delta):
    for c, pk in zip(counts, p):
        if abs(c / n - pk) > delta * pk:
            return False
    return True


def typical_set(pmf, n, delta):
    """All length-n blocks whose type is entrywise relatively delta-close.

    Membership requires |type(x) - p(x)| <= delta * p(x) for every symbol,
    so symbols with zero probability may not occur at all. Yields blocks
    in lexicographic order.
    """
    p = _check_pmf_vector(pmf)
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n!r}")
    if not isinstance(delta, (int, float)) or not delta >= 0.0:
        raise DomainError(f"delta must be nonnegative, got {delta!r}")
    a = p.size
    if a**n > _STATE_GUARD:
        raise SizeError(f"{a}^{n} blocks exceed the enumeration budget {_STATE_GUARD}")
    for seq in itertools.product(range(a), repeat=n):
        counts = [0] * a
        for s in seq:
            counts[s] += 1
        if _type_is_typical(counts, n, p, delta):
            yield seq


def typical_set_size(pmf, n, delta):
    """|T_delta| by summing multinomial sizes over qualifying types."""
    p = _check_pmf_vector(pmf)
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n!r}")
    if not isinstance(delta, (int, float)) or not delta >= 0.0:
        raise DomainError(f"delta must be nonnegative, got {delta!r}")
    total = 0
    for t in enumerate_types(p.size, n):
        if _type_is_typical(t.counts, n, p, delta):
            total += t.sequence_count()
    return total


def sequence_probability_identity_check(pmf, seq):
    """Residual of log P(block) = -n (H(type) + D(type || pmf)).

    The left side multiplies letter probabilities, the right side goes
    through the type; both are exact in theory, so the residual is float
    noise and must be tiny.
    """
    p = _check_pmf_vector(pmf)
    seq = tuple(int(s) for s in seq)
    if not seq:
        raise SizeError("the sequence must be nonempty")
    log_p = 0.0
    for s in seq:
        if not 0 <= s < p.size:
            raise DomainError(f"symbol {s} outside alphabet of size {p.size}")
        if p[s] == 0.0:
            raise SupportError(f"symbol {s} observed but has zero probability")
        log_p += math.log(p[s])
    t = type_of(seq, p.size)
    n = len(seq)
    t_pmf = t.pmf
    pos = t_pmf > 0.0
    h_hat = entropy_of_array(t_pmf)
    div = float(np.sum(t_pmf[pos] * np.log(t_pmf[pos] / p[pos])))
    return abs(log_p - (-n * (h_hat + div)))


def _product_table(pxz, n):
    table = pxz
    for _ in range(n - 1):
        table = np.kron(table, pxz)
    return table


def _push_forward(table, f, g, m1, m2):
    w = np.zeros((m1, m2))
    f_idx = np.asarray(f, dtype=np.intp)
    g_idx = np.asarray(g, dtype=np.intp)
    np.add.at(w, (f_idx[:, None], g_idx[None, :]), table)
    return w


def _theta_of_tables(table, n, f, g, m1, m2):
    w = _push_forward(table, f, g, m1, m2)
    joint = JointPmf((Alphabet(m1, "u"), Alphabet(m2, "v")), w)
    return mutual_information(joint, "u", "v") / n


def theta(p_xz, code):
    """Per-letter mutual information between the two bin indices.

    Exact pushforward of the n-fold product source through the lookup
    tables; the mutual information reuses the JointPmf route bit for bit.
    """
    if len(p_xz.axes) != 2:
        raise DomainError(f"theta needs a two-axis source, got {p_xz.labels}")
    nx, nz = p_xz.mass.shape
    n = code.n
    if nx**n * nz**n > _STATE_GUARD:
        raise SizeError(
            f"{nx}^{n} * {nz}^{n} joint blocks exceed the enumeration budget {_STATE_GUARD}"
        )
    if len(code.f) != nx**n:
        raise DomainError(f"f table has {len(code.f)} entries, expected {nx}**{n}")
    if len(code.g) != nz**n:
        raise DomainError(f"g table has {len(code.g)} entries, expected {nz}**{n}")
    table = _product_table(p_xz.mass, n)
    return _theta_of_tables(table, n, code.f, code.g, code.m1, code.m2)


def _rgs_count(length, max_labels):
    # restricted growth strings of a given length using at most max_labels
    row = {0: 1}
    for _ in range(length):
        nxt = {}
        for used, ways in row.items():
            if used > 0:
                nxt[used] = nxt.get(used, 0) + ways * used
            if used < max_labels:
                nxt[used + 1] = nxt.get(used + 1, 0) + ways
        row = nxt
    return sum(row.values())


def _rgs_strings(length, max_labels):
    seq = [0] * length

    def rec(pos, used):
        if pos == length:
            yield tuple(seq)
            return
        for v in range(min(used + 1, max_labels)):
            seq[pos] = v
            yield from rec(pos + 1, max(used, v + 1))

    yield from rec(0, 0)


def best_theta(p_xz, n, m1, m2):
    """Exhaustive maximum of theta over all deterministic code pairs.

    Theta is invariant under relabeling of either index set, so only
    label-canonical tables (restricted growth strings) are enumerated;
    ties go to the earliest pair in enumeration order. The search space
    shards cleanly over f-strings and the reduction is an associative
    max, so the loop parallelizes without changing the result.
    """
    if len(p_xz.axes) != 2:
        raise DomainError(f"best_theta needs a two-axis source, got {p_xz.labels}")
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n!r}")
    for name, m in (("m1", m1), ("m2", m2)):
        if not isinstance(m, int) or m < 1:
            raise DomainError(f"{name} must be a positive integer, got {m!r}")
    nx, nz = p_xz.mass.shape
    if nx**n * nz**n > _STATE_GUARD:
        raise SizeError(
            f"{nx}^{n} * {nz}^{n} joint blocks exceed the enumeration budget {_STATE_GUARD}"
        )
    len_f, len_g = nx**n, nz**n
    pruned = _rgs_count(len_f, m1) * _rgs_count(len_g, m2)
    if pruned > _CODE_GUARD:
        raise SizeError(
            f"{pruned} canonical code pairs (raw count {m1**len_f * m2**len_g}) "
            f"exceed the search budget {_CODE_GUARD}"
        )
    table = _product_table(p_xz.mass, n)
    i_xz = mutual_information(p_xz, p_xz.labels[0], p_xz.labels[1])
    best_val, best_pair = -math.inf, None
    for f in _rgs_strings(len_f, m1):
        for g in _rgs_strings(len_g, m2):
            val = _theta_of_tables(table, n, f, g, m1, m2)
            if val > best_val:
                best_val, best_pair = val, (f, g)
    cap = min(math.log(m1) / n, math.log(m2) / n, i_xz)
    assert best_val <= cap + 1e-12
    return best_val, CodeSpec(n, best_pair[0], best_pair[1], m1, m2)
