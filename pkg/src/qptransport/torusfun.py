"""Analytic functions on the torus: finite Fourier series with a strip.

Everything downstream (potentials, conjugation angles, matrix entries) lives
here.  Strip sup-norms are grid maxima over a ladder of imaginary offsets,
documented as refinable lower bounds of the true sup.  Birkhoff sums are
direct summation only, with top-level compensated accumulation for long
orbits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutsideStrip

TWO_PI = 2.0 * math.pi

# chunk length for long Birkhoff sums; chunk partial sums are combined with
# math.fsum so cancellation below float accumulation error stays visible
_CHUNK = 1 << 16


@dataclass(frozen=True)
class StripGrid:
    """Sampling grid used by strip_norm: imaginary offsets x points per circle."""

    imag_offsets: tuple
    points_per_circle: int

    @classmethod
    def for_function(cls, f: "AnalyticTorusFunction", h: float, n_offsets: int = 5,
                     points_per_circle: int | None = None) -> "StripGrid":
        pts = points_per_circle or max(4 * max(f.N, 1), 64)
        offsets = tuple(np.linspace(-h, h, max(n_offsets, 2)))
        return cls(imag_offsets=offsets, points_per_circle=pts)


@dataclass(frozen=True)
class AnalyticTorusFunction:
    """Finite Fourier series sum_{|n|<=N} c_n e^{2 pi i n z} on |Im z| < h."""

    coeffs: np.ndarray  # complex, length 2N+1, index n+N
    strip_radius: float
    N: int = field(default=0)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        n = (len(c) - 1) // 2
        if len(c) != 2 * n + 1:
            raise ValueError("coeffs must have odd length 2N+1")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "N", n)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict, strip_radius: float) -> "AnalyticTorusFunction":
        n_max = max((abs(int(k)) for k in d), default=0)
        c = np.zeros(2 * n_max + 1, dtype=complex)
        for k, v in d.items():
            c[int(k) + n_max] = v
        return cls(c, strip_radius)

    @classmethod
    def constant(cls, value, strip_radius: float = 1.0) -> "AnalyticTorusFunction":
        return cls(np.array([value], dtype=complex), strip_radius)

    @classmethod
    def cosine(cls, amplitude: float = 1.0, strip_radius: float = 1.0) -> "AnalyticTorusFunction":
        """amplitude * cos(2 pi theta); the almost-Mathieu potential 2 lambda cos
        is cosine(2*lambda)."""
        return cls.from_dict({1: amplitude / 2, -1: amplitude / 2}, strip_radius)

    @classmethod
    def from_samples(cls, values, strip_radius: float, n_modes: int | None = None) -> "AnalyticTorusFunction":
        """Trigonometric interpolation of samples on the uniform grid j/len."""
        values = np.asarray(values, dtype=complex)
        m = len(values)
        chat = np.fft.fft(values) / m
        n_max = (m - 1) // 2 if n_modes is None else min(n_modes, (m - 1) // 2)
        c = np.zeros(2 * n_max + 1, dtype=complex)
        c[n_max] = chat[0]
        for n in range(1, n_max + 1):
            c[n_max + n] = chat[n]
            c[n_max - n] = chat[m - n]
        return cls(c, strip_radius)

    # -- basic queries -------------------------------------------------------

    @property
    def mean(self) -> complex:
        """Zeroth Fourier coefficient."""
        return complex(self.coeffs[self.N])

    def coefficient(self, n: int) -> complex:
        if abs(n) > self.N:
            return 0.0 + 0.0j
        return complex(self.coeffs[n + self.N])

    def is_real_on_real(self, tol: float = 1e-12) -> bool:
        c = self.coeffs
        return bool(np.all(np.abs(c[::-1].conj() - c) <= tol * max(1.0, np.abs(c).max())))

    def coefficient_bound(self) -> float:
        """sum |c_n|: a rigorous bound for sup over the real torus."""
        return float(np.abs(self.coeffs).sum())

    # -- algebra -------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, AnalyticTorusFunction):
            n = max(self.N, other.N)
            c = np.zeros(2 * n + 1, dtype=complex)
            c[n - self.N: n + self.N + 1] += self.coeffs
            c[n - other.N: n + other.N + 1] += other.coeffs
            return AnalyticTorusFunction(c, min(self.strip_radius, other.strip_radius))
        c = self.coeffs.copy()
        c[self.N] += other
        return AnalyticTorusFunction(c, self.strip_radius)

    def __sub__(self, other):
        if isinstance(other, AnalyticTorusFunction):
            return self + (other * (-1.0))
        return self + (-other)

    def __mul__(self, scalar):
        return AnalyticTorusFunction(self.coeffs * scalar, self.strip_radius)

    __rmul__ = __mul__

    def shifted(self, delta: float) -> "AnalyticTorusFunction":
        """The function theta -> f(theta + delta)."""
        n = np.arange(-self.N, self.N + 1)
        return AnalyticTorusFunction(self.coeffs * np.exp(1j * TWO_PI * n * delta), self.strip_radius)

    # -- evaluation ----------------------------------------------------------

    def __call__(self, z):
        return evaluate(self, z)

    def sample(self, grid_size: int):
        """Values on the uniform real grid j/grid_size via zero-padded FFT."""
        if grid_size < 2 * self.N + 1:
            raise ValueError("grid must resolve all modes")
        chat = np.zeros(grid_size, dtype=complex)
        chat[0] = self.coeffs[self.N]
        for n in range(1, self.N + 1):
            chat[n] = self.coeffs[self.N + n]
            chat[-n] = self.coeffs[self.N - n]
        return np.fft.ifft(chat) * grid_size


def _eval_series(f: AnalyticTorusFunction, z):
    n = np.arange(-f.N, f.N + 1)
    phases = np.exp(1j * TWO_PI * np.multiply.outer(z, n))
    return phases @ f.coeffs


def evaluate(f: AnalyticTorusFunction, z):
    """Evaluate the Fourier series at torus point(s) z (real or complex)."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z.imag) >= f.strip_radius):
        raise OutsideStrip(
            f"|Im z| up to {np.abs(z.imag).max():.4g} outside strip of radius {f.strip_radius:.4g}"
        )
    out = _eval_series(f, z)
    return complex(out) if out.ndim == 0 else out


def strip_norm(f: AnalyticTorusFunction, h: float, grid: StripGrid | None = None) -> float:
    """Max of |f| over the grid at imaginary offsets up to +-h.

    A lower bound of the true sup; refine by enlarging the grid.  The closed
    strip boundary Im z = +-h is included (finite series are entire).
    """
    if h > f.strip_radius:
        raise OutsideStrip(f"h={h} exceeds strip radius {f.strip_radius}")
    if grid is None:
        grid = StripGrid.for_function(f, h)
    if grid.points_per_circle < 4 * max(f.N, 1):
        raise ValueError("points_per_circle below the 4N Nyquist margin")
    theta = np.arange(grid.points_per_circle) / grid.points_per_circle
    best = 0.0
    for off in grid.imag_offsets:
        vals = _eval_series(f, theta + 1j * off)
        best = max(best, float(np.abs(vals).max()))
    return best


def birkhoff_sum(f: AnalyticTorusFunction, n: int, alpha: float, theta) -> complex:
    """sum_{k=0}^{n-1} f(theta + k alpha); negative n uses k = -|n| .. -1."""
    if n == 0:
        return 0.0 + 0.0j
    if n > 0:
        ks = (0, n)
    else:
        ks = (n, 0)
    partials = []
    for start in range(ks[0], ks[1], _CHUNK):
        stop = min(start + _CHUNK, ks[1])
        k = np.arange(start, stop)
        vals = _eval_series(f, np.asarray(theta + k * alpha, dtype=complex))
        partials.append(complex(np.sum(vals)))
    total = complex(math.fsum(p.real for p in partials), math.fsum(p.imag for p in partials))
    return total


def birkhoff_sum_grid(f: AnalyticTorusFunction, n: int, alpha: float, thetas) -> np.ndarray:
    """Birkhoff sums at an array of base points, vectorised over the orbit."""
    thetas = np.asarray(thetas, dtype=complex)
    if n == 0:
        return np.zeros_like(thetas)
    lo, hi = (0, n) if n > 0 else (n, 0)
    total = np.zeros_like(thetas)
    chunk = max(_CHUNK // max(len(thetas), 1), 1)
    for start in range(lo, hi, chunk):
        stop = min(start + chunk, hi)
        k = np.arange(start, stop)
        pts = thetas[:, None] + k[None, :] * alpha
        total = total + _eval_series(f, pts).sum(axis=1)
    return total


def birkhoff_decay_check(
    f: AnalyticTorusFunction,
    Qseq,
    h: float,
    eta: float,
    M: float = 2.0,
    alpha: float | None = None,
    grid_points: int = 64,
    n_offsets: int = 3,
) -> list:
    """Measured ||f^{[Q_k]} - Q_k fhat(0)||_{h_k} against the comparison bound.

    h_k = h (1 - eta k^{-2});  bound shape C (Q_k^{-M} + Qbar_k^{-1+1/M}) with
    C = ||f - fhat(0)||_h.  Returns one row per level k >= 1; rows carry a
    flag when the measured norm fails to stay below the previous level's.
    """
    if h > f.strip_radius:
        raise OutsideStrip(f"h={h} exceeds strip radius {f.strip_radius}")
    alpha = Qseq.alpha if alpha is None else alpha
    if alpha is None:
        raise ValueError("subsequence carries no frequency; pass alpha explicitly")
    centred = f - f.mean
    scale = strip_norm(centred, h)
    rows = []
    prev = math.inf
    theta0 = np.arange(grid_points) / grid_points
    for k in range(1, Qseq.levels):
        hk = h * (1 - eta / k**2)
        if hk <= 0:
            continue
        Qk = Qseq.Q[k]
        qbar = Qseq.Qbar[k]
        measured = 0.0
        for off in np.linspace(-hk, hk, n_offsets):
            sums = birkhoff_sum_grid(centred, Qk, alpha, theta0 + 1j * off)
            measured = max(measured, float(np.abs(sums).max()))
        bound = scale * (Qk ** (-M) + (qbar ** (-1 + 1 / M) if qbar else 0.0))
        rows.append(
            {
                "k": k,
                "Q": Qk,
                "Qbar": qbar,
                "h_k": hk,
                "measured": measured,
                "bound": bound,
                "monotone": measured <= prev * (1 + 1e-9),
            }
        )
        prev = measured
    return rows


def fourier_roundtrip_error(f: AnalyticTorusFunction, points_per_circle: int | None = None) -> float:
    """Max coefficient error of from_samples(evaluate(.)) against f."""
    pts = points_per_circle or max(4 * max(f.N, 1), 8)
    theta = np.arange(pts) / pts
    g = AnalyticTorusFunction.from_samples(evaluate(f, theta), f.strip_radius, n_modes=f.N)
    return float(np.abs(g.coeffs - f.coeffs).max())
