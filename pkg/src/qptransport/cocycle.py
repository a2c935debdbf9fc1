"""Schrodinger transfer-matrix cocycle and its spectral quantities.

Lyapunov exponent, fibered rotation number, integrated density of states,
gap labels, Thouless-formula consistency and the m-function / M-matrix
machinery.  Hot loops are numba-compiled when numba is importable and fall
back to numpy batch recursions otherwise, so results are identical either
way (the kernels are straight-line float arithmetic).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import GridTooCoarse, NoGapsDetected, NotConverged
from .torusfun import AnalyticTorusFunction, evaluate

try:
    from numba import njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# SL(2) values


@dataclass(frozen=True)
class SL2:
    """A 2x2 unit-determinant matrix; renormalised when det drifts."""

    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float))

    @classmethod
    def identity(cls) -> "SL2":
        return cls(np.eye(2))

    @classmethod
    def rotation(cls, phi: float) -> "SL2":
        c, s = math.cos(phi), math.sin(phi)
        return cls(np.array([[c, -s], [s, c]]))

    @property
    def det(self) -> float:
        a = self.m
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])

    def __matmul__(self, other: "SL2") -> "SL2":
        return SL2(self.m @ other.m)

    def inv(self) -> "SL2":
        a = self.m
        return SL2(np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / self.det)

    def renormalized(self, tol: float = 1e-12) -> "SL2":
        d = self.det
        if abs(d - 1.0) > tol and d > 0:
            return SL2(self.m / math.sqrt(d))
        return self

    def norm(self) -> float:
        return float(np.linalg.norm(self.m, 2))


def rotation_matrix(phi):
    """R_phi as a raw array; phi may be an array (stacked output)."""
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    out = np.empty(phi.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


# ---------------------------------------------------------------------------
# the cocycle family


@dataclass(frozen=True)
class CocycleFamily:
    """Energy-parametrised Schrodinger cocycle over theta -> theta + alpha."""

    alpha: float
    V: AnalyticTorusFunction
    energy_window: tuple = (-4.0, 4.0)

    def __post_init__(self):
        if not self.V.is_real_on_real():
            raise ValueError("potential must be real on the real torus")

    @classmethod
    def free(cls, alpha: float) -> "CocycleFamily":
        return cls(alpha, AnalyticTorusFunction.constant(0.0, strip_radius=1.0), (-2.5, 2.5))

    @classmethod
    def almost_mathieu(cls, lam: float, alpha: float, strip_radius: float = 1.0) -> "CocycleFamily":
        """V = 2 lambda cos(2 pi theta)."""
        w = 2.0 + 2.0 * abs(lam) + 0.5
        return cls(alpha, AnalyticTorusFunction.cosine(2.0 * lam, strip_radius), (-w, w))

    def potential_orbit(self, theta: float, n: int, start: int = 0) -> np.ndarray:
        """V(theta + k alpha) for k = start .. start+n-1, as a float array."""
        ks = np.arange(start, start + n)
        vals = evaluate(self.V, (theta + ks * self.alpha) % 1.0)
        return np.ascontiguousarray(vals.real)

    def sup_potential(self) -> float:
        return self.V.coefficient_bound()


def transfer_matrix(fam: CocycleFamily, E: float, theta: float) -> SL2:
    """A(E, theta) = ((V(theta) - E, -1), (1, 0)); det = 1 by construction."""
    v = evaluate(fam.V, theta % 1.0).real
    return SL2(np.array([[v - E, -1.0], [1.0, 0.0]]))


def iterate(fam: CocycleFamily, E: float, theta: float, n: int) -> SL2:
    """The n-step cocycle product A^{(n)}(E, theta) with det renormalisation.

    Negative n uses the inverse convention A^{(-n)} = [A^{(n)}(theta - n
    alpha)]^{-1} expanded as a product of step inverses.
    """
    if n == 0:
        return SL2.identity()
    P = np.eye(2)
    if n > 0:
        v = fam.potential_orbit(theta, n)
        for k in range(n):
            t = v[k] - E
            P = np.array([[t * P[0, 0] - P[1, 0], t * P[0, 1] - P[1, 1]], [P[0, 0], P[0, 1]]])
            if k % 64 == 63:
                d = P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
                P /= math.sqrt(abs(d))
    else:
        m = -n
        v = fam.potential_orbit(theta, m, start=-m)
        # sites theta - alpha, theta - 2 alpha, ... left-multiplied in turn;
        # inverse of ((t, -1), (1, 0)) is ((0, 1), (-1, t))
        for k in range(m - 1, -1, -1):
            t = v[k] - E
            P = np.array(
                [[P[1, 0], P[1, 1]], [-P[0, 0] + t * P[1, 0], -P[0, 1] + t * P[1, 1]]]
            )
            if k % 64 == 1:
                d = P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
                P /= math.sqrt(abs(d))
    return SL2(P).renormalized()


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _lyap_kernel(v, E):  # pragma: no cover - compiled
    a11, a12, a21, a22 = 1.0, 0.0, 0.0, 1.0
    acc = 0.0
    comp = 0.0
    for k in range(v.shape[0]):
        t = v[k] - E
        b11 = t * a11 - a21
        b12 = t * a12 - a22
        a21 = a11
        a22 = a12
        a11 = b11
        a12 = b12
        if k % 32 == 31:
            s = abs(a11) + abs(a12) + abs(a21) + abs(a22)
            if s > 0:
                a11 /= s
                a12 /= s
                a21 /= s
                a22 /= s
                y = math.log(s) - comp
                tsum = acc + y
                comp = (tsum - acc) - y
                acc = tsum
    nrm = math.sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22)
    return acc + math.log(nrm)


def _lyap_numpy(v, E):
    a11, a12, a21, a22 = 1.0, 0.0, 0.0, 1.0
    acc = []
    for k in range(v.shape[0]):
        t = v[k] - E
        a11, a12, a21, a22 = t * a11 - a21, t * a12 - a22, a11, a12
        if k % 32 == 31:
            s = abs(a11) + abs(a12) + abs(a21) + abs(a22)
            a11, a12, a21, a22 = a11 / s, a12 / s, a21 / s, a22 / s
            acc.append(math.log(s))
    acc.append(math.log(math.sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22)))
    return math.fsum(acc)


@njit(cache=True)
def _rotation_kernel(v, E):  # pragma: no cover - compiled
    # u_0 = 0, u_1 = 1; count sign changes of (u_k) for k = 1..n
    u_prev = 0.0
    u_cur = 1.0
    crossings = 0
    for k in range(1, v.shape[0]):
        u_next = (v[k] - E) * u_cur - u_prev
        if u_cur * u_next < 0.0 or u_next == 0.0:
            crossings += 1
        s = abs(u_next) + abs(u_cur)
        if s > 1e100:
            u_next /= s
            u_cur /= s
        u_prev = u_cur
        u_cur = u_next
    return crossings


def _rotation_numpy_batch(v, Es):
    Es = np.asarray(Es, dtype=float)
    u_prev = np.zeros_like(Es)
    u_cur = np.ones_like(Es)
    crossings = np.zeros(Es.shape, dtype=np.int64)
    for k in range(1, v.shape[0]):
        u_next = (v[k] - Es) * u_cur - u_prev
        crossings += ((u_cur * u_next < 0.0) | (u_next == 0.0)).astype(np.int64)
        s = np.abs(u_next) + np.abs(u_cur)
        big = s > 1e100
        if big.any():
            u_next = np.where(big, u_next / s, u_next)
            u_cur = np.where(big, u_cur / s, u_cur)
        u_prev = u_cur
        u_cur = u_next
    return crossings


# ---------------------------------------------------------------------------
# spectral quantities


class LyapunovEstimate(NamedTuple):
    gamma: float
    spread: float
    per_theta: tuple

    def __float__(self):
        return self.gamma


class RotationEstimate(NamedTuple):
    rho: float
    error: float

    def __float__(self):
        return self.rho


def lyapunov(fam: CocycleFamily, E: float, n: int = 100_000, theta_samples: int = 4) -> LyapunovEstimate:
    """(1/n) log ||A^{(n)}|| averaged over equidistributed phases.

    The running product is renormalised every 32 steps; the log is
    accumulated with compensated summation.  The spread of the per-theta
    estimates is reported alongside the mean.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    vals = []
    for j in range(theta_samples):
        theta = (j + 0.5) / theta_samples
        v = fam.potential_orbit(theta, n)
        if _HAVE_NUMBA:
            total = _lyap_kernel(v, E)
        else:
            total = _lyap_numpy(v, E)
        vals.append(total / n)
    gamma = float(np.mean(vals))
    spread = float(np.std(vals))
    return LyapunovEstimate(gamma=gamma, spread=spread, per_theta=tuple(vals))


def rotation_number(fam: CocycleFamily, E: float, n: int = 1_000_000, theta0: float = 0.0) -> RotationEstimate:
    """Fibered rotation number in [0, pi], normalised so ids = rho/pi.

    The projective angle lift is tracked through its crossings of the u = 0
    section (one crossing = one half-turn), which pins the unwrapping branch
    exactly; plain per-step atan2 unwrapping aliases near band tops.  The
    discretisation error is O(1/n) and reported.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    v = fam.potential_orbit(theta0, n)
    if _HAVE_NUMBA:
        crossings = _rotation_kernel(v, E)
    else:
        crossings = int(_rotation_numpy_batch(v, np.array([E]))[0])
    steps = max(n - 1, 1)
    rho = math.pi * crossings / steps
    return RotationEstimate(rho=min(max(rho, 0.0), math.pi), error=2 * math.pi / steps)


def rotation_number_grid(fam: CocycleFamily, energies, n: int = 100_000, theta0: float = 0.0) -> np.ndarray:
    """rotation_number over an energy grid, sharing one potential orbit."""
    energies = np.asarray(energies, dtype=float)
    v = fam.potential_orbit(theta0, n)
    if _HAVE_NUMBA:
        crossings = np.array([_rotation_kernel(v, E) for E in energies], dtype=np.int64)
    else:
        crossings = _rotation_numpy_batch(v, energies)
    steps = max(n - 1, 1)
    return np.clip(math.pi * crossings / steps, 0.0, math.pi)


def ids(fam: CocycleFamily, E: float, n: int = 1_000_000, theta0: float = 0.0) -> float:
    """Integrated density of states k(E) = rho(E)/pi, clamped to [0, 1].

    The clamping realises the boundary cases (0 below the spectrum, 1
    above), which the crossing count already produces exactly.
    """
    rho = rotation_number(fam, E, n=n, theta0=theta0).rho
    return min(max(rho / math.pi, 0.0), 1.0)


# ---------------------------------------------------------------------------
# scans, gaps, labels


@dataclass
class Gap:
    index: int
    e_lo: float
    e_hi: float
    rho: float
    label: int | None = None
    residual: float = math.inf
    labeled: bool = False


@dataclass
class SpectralScan:
    """Per-energy spectral data on a grid, with detected gaps."""

    energies: np.ndarray
    gamma: np.ndarray
    rho: np.ndarray
    ids: np.ndarray
    rho_error: float
    gap_id: np.ndarray = field(default=None)
    gaps: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# schema=qp-transport/v1/spectral_scan\n")
        buf.write("E,gamma,rho,ids,gap_id,gap_label\n")
        labels = {g.index: g.label for g in self.gaps}
        for i, E in enumerate(self.energies):
            gid = int(self.gap_id[i]) if self.gap_id is not None else -1
            lab = labels.get(gid)
            buf.write(
                f"{E:.17g},{self.gamma[i]:.17g},{self.rho[i]:.17g},{self.ids[i]:.17g},"
                f"{gid},{'' if lab is None else lab}\n"
            )
        return buf.getvalue()


def scan(
    fam: CocycleFamily,
    energies,
    n_rot: int = 100_000,
    n_lyap: int = 20_000,
    theta0: float = 0.0,
    theta_samples: int = 2,
    plateau_factor: float = 10.0,
) -> SpectralScan:
    """Rotation number, Lyapunov exponent and ids over an energy grid.

    Gap detection: a maximal run of grid points whose consecutive rho
    increments stay below plateau_factor/n_rot, not touching the grid ends
    and away from rho = 0, pi.
    """
    energies = np.asarray(energies, dtype=float)
    rho = rotation_number_grid(fam, energies, n=n_rot, theta0=theta0)
    gam = np.array([lyapunov(fam, E, n=n_lyap, theta_samples=theta_samples).gamma for E in energies])
    k = np.clip(rho / math.pi, 0.0, 1.0)
    out = SpectralScan(
        energies=energies,
        gamma=gam,
        rho=rho,
        ids=k,
        rho_error=2 * math.pi / n_rot,
    )
    thresh = plateau_factor / n_rot
    m = len(energies)
    gap_id = -np.ones(m, dtype=int)
    gaps = []
    i = 0
    while i < m - 1:
        if abs(rho[i + 1] - rho[i]) < thresh:
            j = i
            while j < m - 1 and abs(rho[j + 1] - rho[j]) < thresh:
                j += 1
            run_rho = float(np.mean(rho[i: j + 1]))
            interior = i > 0 and j < m - 1
            away = min(run_rho, math.pi - run_rho) > 10 * thresh
            if interior and away and j > i:
                g = Gap(index=len(gaps), e_lo=float(energies[i]), e_hi=float(energies[j]), rho=run_rho)
                gaps.append(g)
                gap_id[i: j + 1] = g.index
            i = j
        else:
            i += 1
    out.gap_id = gap_id
    out.gaps = gaps
    return out


def _circle_dist_mod_pi(x: float, y: float) -> float:
    d = (x - y) % math.pi
    return min(d, math.pi - d)


def gap_labels(scan_result: SpectralScan, alpha: float, l_max: int = 20, tolerance: float = 1e-3) -> list:
    """Label each detected gap with the integer l minimising
    |rho - l alpha/2 mod pi|; residuals above tolerance leave the gap
    unlabeled."""
    if not scan_result.gaps:
        raise NoGapsDetected("no rotation-number plateaus in the scan")
    for g in scan_result.gaps:
        best_l, best_r = None, math.inf
        for l in range(-l_max, l_max + 1):
            r = _circle_dist_mod_pi(g.rho, l * alpha / 2.0)
            if r < best_r - 1e-15:
                best_l, best_r = l, r
        g.label = best_l
        g.residual = best_r
        g.labeled = best_r <= tolerance
    return scan_result.gaps


# ---------------------------------------------------------------------------
# Thouless formula


def thouless_check(
    scan_result: SpectralScan,
    energies_to_check=None,
    max_cell: float = 0.02,
) -> list:
    """|gamma_direct(E) - integral ln|E - E'| dk(E')| per checked energy.

    The Stieltjes integral uses the scan's ids grid; on each grid cell the
    log kernel is integrated analytically against a uniform dk density, so
    the singularity needs no special casing.
    """
    E_grid = scan_result.energies
    if np.max(np.diff(E_grid)) > max_cell:
        raise GridTooCoarse(
            f"k-grid increment {np.max(np.diff(E_grid)):.3g} exceeds budget {max_cell}"
        )
    k = scan_result.ids
    dk = np.diff(k)
    a = E_grid[:-1]
    b = E_grid[1:]
    width = b - a

    def F(u):
        out = np.zeros_like(u)
        nz = u != 0
        out[nz] = u[nz] * np.log(np.abs(u[nz])) - u[nz]
        return out

    if energies_to_check is None:
        energies_to_check = E_grid[:: max(len(E_grid) // 64, 1)]
    rows = []
    for E in np.asarray(energies_to_check, dtype=float):
        cell_int = (F(b - E) - F(a - E)) / width
        integral = float(np.sum(dk * cell_int))
        idx = int(np.argmin(np.abs(E_grid - E)))
        direct = float(scan_result.gamma[idx])
        rows.append(
            {"E": float(E), "gamma_direct": direct, "thouless": integral,
             "discrepancy": abs(direct - integral)}
        )
    return rows


# ---------------------------------------------------------------------------
# m-functions and the M matrix


def _m_halfline(fam: CocycleFamily, z: complex, side: int, depth: int, theta: float) -> complex:
    """Continued-fraction ratio truncated at the given depth."""
    if side > 0:
        # t_{n+1} = (V_n - z) - 1/t_n, upward from n = -depth to n = 0
        t = -z
        ks = np.arange(-depth, 1)
        v = evaluate(fam.V, (theta + ks * fam.alpha) % 1.0).real
        for vk in v:
            t = (vk - z) - 1.0 / t
        return -t  # -u_1/u_0
    # s_{n-1} = (V_n - z) - 1/s_n, downward from n = depth to n = 0
    s = -z
    ks = np.arange(depth, -1, -1)
    v = evaluate(fam.V, (theta + ks * fam.alpha) % 1.0).real
    for vk in v:
        s = (vk - z) - 1.0 / s
    return -s  # -u_{-1}/u_0


def m_function(
    fam: CocycleFamily,
    z: complex,
    side: int = +1,
    depth: int = 32,
    theta: float = 0.0,
    tol: float = 1e-8,
    max_doublings: int = 16,
) -> complex:
    """Herglotz half-line ratio m^+/- via the transfer-matrix continued
    fraction, doubling the truncation depth until two successive depths agree
    to tol.

    The free-case value solves m + 1/m = z with Im m > 0.
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("m-functions are defined for Im z > 0")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    prev = _m_halfline(fam, z, side, depth, theta)
    cur = prev
    for _ in range(max_doublings):
        depth *= 2
        cur = _m_halfline(fam, z, side, depth, theta)
        if abs(cur - prev) <= tol:
            if cur.imag <= 0:
                raise NotConverged(f"m-function lost the Herglotz property: {cur}")
            return cur
        prev = cur
    raise NotConverged(f"nested-disk radius {abs(cur - prev):.3e} above {tol} at depth {depth}")


def M_matrix(fam: CocycleFamily, z: complex, depth: int = 32, theta: float = 0.0, tol: float = 1e-8) -> np.ndarray:
    """The 2x2 Borel-transform matrix -(1/(m+ + m-)) ((1, m+), (-m-, -m+ m-))."""
    mp = m_function(fam, z, +1, depth, theta, tol)
    mm = m_function(fam, z, -1, depth, theta, tol)
    return -np.array([[1.0 + 0j, mp], [-mm, -mp * mm]]) / (mp + mm)


def borel_transform(fam: CocycleFamily, z: complex, depth: int = 32, theta: float = 0.0) -> complex:
    """Scalar Borel transform (m+ m- - 1)/(m+ + m-) of the spectral measure."""
    mp = m_function(fam, z, +1, depth, theta)
    mm = m_function(fam, z, -1, depth, theta)
    return (mp * mm - 1.0) / (mp + mm)


def spectral_density(fam: CocycleFamily, E: float, eps: float = 1e-3, depth: int = 32, theta: float = 0.0) -> np.ndarray:
    """Im M(E + i eps)/pi: the eps-smoothed density of the matrix measure."""
    M = M_matrix(fam, E + 1j * eps, depth=depth, theta=theta)
    return np.imag(M) / math.pi
