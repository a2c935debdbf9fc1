"""Continued fractions, CD bridges, admissible denominator subsequences.

The denominators q_k of an irrational frequency alpha schedule every scale in
the package: resonance tests, conjugation levels and the time windows of the
transport lower bound.  Convergents are kept as exact integers; alpha itself
is held in mpmath extended precision so that expansions to depth ~100 do not
drift.  All power-law comparisons (q^A style) are done in log space with a
documented additive slack.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field

import mpmath

from .errors import ConstructionFailed, IndexOutOfRange, NearRational

# Additive slack for log-space comparisons of q^A predicates.
LOG_SLACK = 1e-12

# Fractional parts below this are indistinguishable from rational input.
NEAR_RATIONAL_FLOOR = 1e-15

# Working precision (decimal digits) for the expansion.
_MP_DPS = 60

NAMED_FREQUENCIES = {
    "golden": "(sqrt(5)-1)/2",
    "silver": "sqrt(2)-1",
}


def _to_mpf(alpha) -> mpmath.mpf:
    """Coerce float / decimal string / mpf to an extended-precision mpf."""
    with mpmath.workdps(_MP_DPS):
        if isinstance(alpha, str):
            key = alpha.strip().lower()
            if key == "golden":
                return (mpmath.sqrt(5) - 1) / 2
            if key == "silver":
                return mpmath.sqrt(2) - 1
            return mpmath.mpf(alpha)
        return mpmath.mpf(alpha)


def _log(q: int) -> float:
    # math.log accepts arbitrary-size ints, so huge denominators are safe.
    return math.log(q)


def _le_pow(a: int, b: int, expo: float) -> bool:
    """a <= b**expo, compared in log space with LOG_SLACK."""
    return _log(a) <= expo * _log(b) + LOG_SLACK


def _ge_pow(a: int, b: int, expo: float) -> bool:
    """a >= b**expo, compared in log space with LOG_SLACK."""
    return _log(a) >= expo * _log(b) - LOG_SLACK


def _gt_pow(a: int, b: int, expo: float) -> bool:
    """a > b**expo (strict), compared in log space with LOG_SLACK."""
    return _log(a) > expo * _log(b) + LOG_SLACK


@dataclass(frozen=True)
class ContinuedFraction:
    """Truncated continued-fraction expansion of an irrational alpha in (0,1).

    ``partial_quotients[k]`` is a_{k+1}; ``denominators[k]`` is q_k, so the
    two lists have equal length ``depth`` and satisfy
    q_{k} = a_k q_{k-1} + q_{k-2} with q_0 = 1, q_1 = a_1.
    """

    alpha: float
    partial_quotients: tuple
    numerators: tuple
    denominators: tuple
    depth: int
    alpha_mp: mpmath.mpf = field(repr=False, compare=False, default=None)

    def qalpha_dist(self, n: int) -> float:
        """Distance of q_n * alpha to the nearest integer (torus norm)."""
        if not 0 <= n < self.depth:
            raise IndexOutOfRange(f"denominator index {n} not in [0, {self.depth})")
        with mpmath.workdps(_MP_DPS):
            x = self.denominators[n] * self.alpha_mp
            return float(abs(x - mpmath.nint(x)))

    def largest_unit_index(self) -> int:
        """Index of the last denominator equal to 1 (0 or 1)."""
        return 1 if self.depth > 1 and self.denominators[1] == 1 else 0

    def index_of_largest_below(self, bound_log: float, start: int = 0) -> int | None:
        """Largest index i >= start with log(q_i) < bound_log, else None."""
        best = None
        for i in range(start, self.depth):
            if _log(self.denominators[i]) < bound_log - LOG_SLACK:
                best = i
            else:
                break
        return best

    def validate(self) -> None:
        """Assert the type invariants; raises AssertionError on violation."""
        a, p, q = self.partial_quotients, self.numerators, self.denominators
        assert q[0] == 1
        for k in range(2, self.depth):
            assert q[k] == a[k - 1] * q[k - 1] + q[k - 2]
            assert q[k] > q[k - 1]
        if self.depth > 1:
            assert q[1] == a[0]
        for k in range(1, self.depth):
            assert abs(p[k] * q[k - 1] - p[k - 1] * q[k]) == 1
        # best-approximation tail bound ||q_n alpha|| <= 1/q_{n+1}
        for n in range(self.depth - 1):
            assert self.qalpha_dist(n) <= 1.0 / q[n + 1] + 1e-30


def expand_cf(alpha, depth: int, denom_cap: int = 10**18) -> ContinuedFraction:
    """Expand alpha in (0,1) to ``depth`` levels or until q exceeds denom_cap.

    Raises NearRational when a fractional part falls below the machine floor
    before the requested depth is reached.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    alpha_mp = _to_mpf(alpha)
    if not 0 < alpha_mp < 1:
        raise ValueError("alpha must lie in (0, 1)")

    with mpmath.workdps(_MP_DPS):
        a_list = []
        x = alpha_mp
        for _ in range(depth):
            inv = 1 / x
            a_k = int(mpmath.floor(inv))
            frac = inv - a_k
            a_list.append(a_k)
            if frac < NEAR_RATIONAL_FLOOR:
                raise NearRational(
                    f"fractional part {float(frac):.3e} below floor at level "
                    f"{len(a_list)}; alpha indistinguishable from rational"
                )
            x = frac

    # one (a, p, q) triple per level: a[k-1] = a_k builds q_k for k >= 1
    p = [0]
    q = [1]
    for k in range(1, depth):
        a_k = a_list[k - 1]
        if k == 1:
            p_k, q_k = 1, a_k
        else:
            p_k = a_k * p[k - 1] + p[k - 2]
            q_k = a_k * q[k - 1] + q[k - 2]
        if q_k > denom_cap:
            break
        p.append(p_k)
        q.append(q_k)
    n_levels = len(q)
    cf = ContinuedFraction(
        alpha=float(alpha_mp),
        partial_quotients=tuple(a_list[:n_levels]),
        numerators=tuple(p),
        denominators=tuple(q),
        depth=n_levels,
        alpha_mp=alpha_mp,
    )
    cf.validate()
    return cf


def _bridge_conditions(cf: ContinuedFraction, l: int, n: int, A: float, B: float, C: float) -> bool:
    """CD(A,B,C) bridge predicate; tolerates the degenerate case l == n."""
    q = cf.denominators
    for i in range(l, n):
        if not _le_pow(q[i + 1], q[i], A):
            return False
    return _ge_pow(q[n], q[l], B) and _le_pow(q[n], q[l], C)


def is_cd_bridge(cf: ContinuedFraction, l: int, n: int, A: float, B: float, C: float) -> bool:
    """Whether the denominator pair (q_l, q_n) forms a CD(A,B,C) bridge."""
    if not (1 <= l < n < cf.depth):
        raise IndexOutOfRange(f"need 1 <= l < n < depth; got l={l}, n={n}, depth={cf.depth}")
    return _bridge_conditions(cf, l, n, A, B, C)


@dataclass(frozen=True)
class AdmissibleSubsequence:
    """Selected scales (Q_k) = (q_{n_k}) with successors (Qbar_k) = (q_{n_k+1}).

    ``Qbar[k]`` is None when the parent expansion does not reach q_{n_k+1};
    only the trailing level may carry None.
    """

    indices: tuple
    Q: tuple
    Qbar: tuple
    params: tuple  # (A, B, C, D)
    alpha: float | None = None

    @classmethod
    def from_indices(cls, cf: ContinuedFraction, indices, params) -> "AdmissibleSubsequence":
        indices = tuple(int(i) for i in indices)
        for i in indices:
            if not 0 <= i < cf.depth:
                raise IndexOutOfRange(f"index {i} outside expansion of depth {cf.depth}")
        q = cf.denominators
        Q = tuple(q[i] for i in indices)
        Qbar = tuple(q[i + 1] if i + 1 < cf.depth else None for i in indices)
        return cls(
            indices=indices,
            Q=Q,
            Qbar=Qbar,
            params=tuple(float(x) for x in params),
            alpha=cf.alpha,
        )

    @property
    def levels(self) -> int:
        return len(self.Q)

    def validate(self, cf: ContinuedFraction | None = None) -> None:
        assert self.Q[0] == 1
        for k in range(1, self.levels):
            assert self.Q[k] > self.Q[k - 1]
        for k, qb in enumerate(self.Qbar):
            assert qb is not None or k == self.levels - 1
        if cf is not None:
            for i, Qk in zip(self.indices, self.Q):
                assert cf.denominators[i] == Qk


def is_admissible(cf: ContinuedFraction, subseq: AdmissibleSubsequence) -> bool:
    """Verifier for (A,B,C,D)-admissibility, straight from the definition.

    For every k >= 1:  Q_k <= Qbar_{k-1}^D, and either Qbar_k > Q_k^A or both
    (Qbar_{k-1}, Q_k) and (Q_k, Q_{k+1}) are CD(A,B,C) bridges (the second
    pair is skipped when Q_{k+1} is not computed).  Q_0 must equal 1.
    """
    A, B, C, D = subseq.params
    for i in subseq.indices:
        if not 0 <= i < cf.depth:
            raise IndexOutOfRange(f"index {i} outside expansion of depth {cf.depth}")
    if subseq.Q[0] != 1:
        return False
    idx = subseq.indices
    for k in range(1, subseq.levels):
        qbar_prev = subseq.Qbar[k - 1]
        if qbar_prev is None:
            raise IndexOutOfRange(f"Qbar_{k-1} not computed in parent expansion")
        if not _le_pow(subseq.Q[k], qbar_prev, D):
            return False
        qbar_k = subseq.Qbar[k]
        if qbar_k is None:
            continue  # successor scale unknown; growth alternative unverifiable
        if _gt_pow(qbar_k, subseq.Q[k], A):
            continue
        if not _bridge_conditions(cf, idx[k - 1] + 1, idx[k], A, B, C):
            return False
        if k + 1 < subseq.levels:
            if not _bridge_conditions(cf, idx[k], idx[k + 1], A, B, C):
                return False
    return True


def standard_params(A: float) -> tuple:
    """The (A, A^3, A^21, A^20) parameter tuple used by the constructor."""
    return (A, A**3, A**21, A**20)


def secondary_params(A: float) -> tuple:
    """The (A, A, A^22, A^21) parameter tuple of the derived sequence."""
    return (A, A, A**22, A**21)


def construct_admissible(
    cf: ContinuedFraction,
    A: float,
    min_levels: int = 0,
    node_budget: int = 200_000,
) -> AdmissibleSubsequence:
    """Build an (A, A^3, A^21, A^20)-admissible subsequence with Q_0 = 1.

    Depth-first forward selection with backtracking; candidates are tried
    smallest-first and every accepted prefix keeps all predicates satisfied.
    The result is re-verified with is_admissible before returning.  Raises
    ConstructionFailed when fewer than ``min_levels`` levels can be certified.
    """
    if A <= 1:
        raise ValueError("A must exceed 1")
    params = standard_params(A)
    pA, pB, pC, pD = params
    q = cf.denominators
    start = cf.largest_unit_index()

    # candidate indices must have a known successor (Qbar required at k >= 1)
    max_idx = cf.depth - 2

    best: list[int] = [start]
    nodes = 0

    def prefix_ok(chain: list[int]) -> bool:
        # The definition itself defers the (Q_k, Q_{k+1}) bridge of the last
        # level, so the verifier doubles as the prefix-viability predicate.
        return is_admissible(cf, AdmissibleSubsequence.from_indices(cf, chain, params))

    def dfs(chain: list[int]) -> None:
        nonlocal nodes, best
        if len(chain) > len(best):
            best = list(chain)
        for n in range(chain[-1] + 1, max_idx + 1):
            if nodes >= node_budget:
                return
            nodes += 1
            if q[n] <= q[chain[-1]]:
                continue
            chain.append(n)
            if prefix_ok(chain):
                dfs(chain)
            chain.pop()

    if max_idx >= start:
        dfs([start])
    result = AdmissibleSubsequence.from_indices(cf, best, params)
    if not is_admissible(cf, result):
        raise ConstructionFailed("greedy construction produced a non-admissible sequence")
    # growth consequence Q_{k+1} >= Q_k^A (forced whenever B >= A)
    for k in range(result.levels - 1):
        if not _ge_pow(result.Q[k + 1], result.Q[k], A):
            raise ConstructionFailed(f"growth consequence Q_{k+1} >= Q_{k}^A violated")
    if result.levels < max(min_levels, 1):
        raise ConstructionFailed(
            f"only {result.levels} admissible level(s) within depth {cf.depth}"
        )
    return result


def derive_secondary(cf: ContinuedFraction, Qseq: AdmissibleSubsequence, A: float) -> AdmissibleSubsequence:
    """Secondary scales R_k: the largest denominator with Q_k <= R_k < Q_k^A.

    Verifies the two-sequence conclusions (Q_k^A <= R_k^A <= Q_{k+1} where the
    bracketing scale exists, Rbar_k >= Q_k^A) and (A, A, A^22, A^21)-
    admissibility before returning.
    """
    if not (
        is_admissible(cf, AdmissibleSubsequence(Qseq.indices, Qseq.Q, Qseq.Qbar, standard_params(A)))
        or is_admissible(cf, AdmissibleSubsequence(Qseq.indices, Qseq.Q, Qseq.Qbar, secondary_params(A)))
    ):
        raise ConstructionFailed("input sequence is not admissible for the given A")
    q = cf.denominators
    indices = [cf.largest_unit_index()]
    for k in range(1, Qseq.levels):
        Qk = Qseq.Q[k]
        lo = bisect_left(q, Qk, lo=1)
        best_i = None
        for i in range(lo, cf.depth):
            if q[i] < Qk:
                continue
            if _log(q[i]) < A * _log(Qk) - LOG_SLACK:
                best_i = i
            else:
                break
        if best_i is None or best_i + 1 >= cf.depth:
            break  # parent expansion exhausted; truncate here
        indices.append(best_i)
    result = AdmissibleSubsequence.from_indices(cf, indices, secondary_params(A))
    # two-sequence conclusion (1), checked numerically
    for k in range(1, result.levels):
        Qk = Qseq.Q[k]
        Rk = result.Q[k]
        Rbar = result.Qbar[k]
        if Rk < Qk:
            raise ConstructionFailed(f"R_{k} < Q_{k}")
        if Rbar is not None and not _ge_pow(Rbar, Qk, A):
            raise ConstructionFailed(f"Rbar_{k} < Q_{k}^A")
        if k + 1 < Qseq.levels and not _ge_pow(Qseq.Q[k + 1], Rk, A):
            raise ConstructionFailed(f"R_{k}^A > Q_{k+1}")
    if not is_admissible(cf, result):
        raise ConstructionFailed("secondary sequence failed the admissibility verifier")
    return result


@dataclass(frozen=True)
class ScaleWindow:
    """Time window [Q_l^{8 tau0}, min(Q_{l+1}^{tau1/16}, Qbar_{l+1}^{nu/16})].

    Bounds are stored in log10 to survive paper-scale exponents; ``lo``/``hi``
    overflow to inf gracefully.
    """

    l: int
    log10_lo: float
    log10_hi: float
    exponents: tuple  # (tau0, tau1, nu)
    empty: bool

    @property
    def lo(self) -> float:
        return 10.0 ** self.log10_lo if self.log10_lo < 308 else math.inf

    @property
    def hi(self) -> float:
        return 10.0 ** self.log10_hi if self.log10_hi < 308 else math.inf

    def contains(self, t_lo: float, t_hi: float) -> bool:
        """Whether [t_lo, t_hi] sits inside the window."""
        if self.empty:
            return False
        return math.log10(t_lo) >= self.log10_lo and math.log10(t_hi) <= self.log10_hi


def scale_windows(Qseq: AdmissibleSubsequence, tau0: float, tau1: float, nu: float) -> list:
    """One ScaleWindow per level l with both Q_{l+1} and Qbar_{l+1} known."""
    if min(tau0, tau1, nu) <= 0:
        raise ValueError("exponents must be positive")
    out = []
    for l in range(Qseq.levels - 1):
        if Qseq.Qbar[l + 1] is None:
            continue
        log10_lo = 8 * tau0 * math.log10(Qseq.Q[l])
        log10_hi = min(
            (tau1 / 16) * math.log10(Qseq.Q[l + 1]),
            (nu / 16) * math.log10(Qseq.Qbar[l + 1]),
        )
        out.append(
            ScaleWindow(
                l=l,
                log10_lo=log10_lo,
                log10_hi=log10_hi,
                exponents=(tau0, tau1, nu),
                empty=log10_lo >= log10_hi,
            )
        )
    return out
