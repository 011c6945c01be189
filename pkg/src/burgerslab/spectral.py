"""Sine-basis spectral representation of fields on (0, 1) with Dirichlet boundary.

All fields are expansions u(x) = sum_n u_n * sqrt(2) sin(n pi x), so they vanish
at x = 0 and x = 1 by construction. The Dirichlet Laplacian eigenvalues are
pi^2 n^2 and the basis is orthonormal in L^2(0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

__all__ = [
    "ResolutionError",
    "SpectralField",
    "GridField",
    "eigenvalue",
    "eigenvalues",
    "eigenfunction_at",
    "to_grid",
    "from_grid",
    "fractional_laplacian_apply",
    "sobolev_norm",
    "lp_norm",
]


class ResolutionError(ValueError):
    """Grid too coarse for the requested mode count (or vice versa)."""


def eigenvalue(n: int) -> float:
    """Eigenvalue of the negative Dirichlet Laplacian for mode n >= 1."""
    if n < 1:
        raise ValueError(f"mode index must be >= 1, got {n}")
    return np.pi**2 * float(n) ** 2


def eigenvalues(n_modes: int) -> np.ndarray:
    """Vector (pi^2 n^2) for n = 1..n_modes."""
    return np.pi**2 * np.arange(1, n_modes + 1, dtype=float) ** 2


def eigenfunction_at(n: int, x) -> float | np.ndarray:
    """Orthonormal eigenfunction sqrt(2) sin(n pi x), for x in [0, 1]."""
    if n < 1:
        raise ValueError(f"mode index must be >= 1, got {n}")
    return np.sqrt(2.0) * np.sin(n * np.pi * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SpectralField:
    """Coefficient vector (u_n) of a sine expansion; u_n is dimensionless."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a nonempty 1-d array")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def n_modes(self) -> int:
        return self.coeffs.size

    @classmethod
    def zero(cls, n_modes: int) -> "SpectralField":
        return cls(np.zeros(n_modes))

    @classmethod
    def mode(cls, n: int, n_modes: int, amplitude: float = 1.0) -> "SpectralField":
        """Single-mode field amplitude * e_n, embedded in n_modes coefficients."""
        if not 1 <= n <= n_modes:
            raise ValueError(f"mode {n} outside 1..{n_modes}")
        c = np.zeros(n_modes)
        c[n - 1] = amplitude
        return cls(c)


@dataclass(frozen=True)
class GridField:
    """Values at the uniform interior points x_j = j / (M + 1), j = 1..M."""

    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if v.ndim != 1 or v.size == 0:
            raise ValueError("grid values must be a nonempty 1-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n_points(self) -> int:
        return self.values.size

    @property
    def points(self) -> np.ndarray:
        m = self.values.size
        return np.arange(1, m + 1, dtype=float) / (m + 1)


def synthesize(coeffs: np.ndarray, n_points: int) -> np.ndarray:
    """Evaluate sum_n c_n sqrt(2) sin(n pi x_j) on the interior grid (array in, array out).

    Uses the type-I discrete sine transform; exact for bandlimited input. Supports
    batched input with modes along the last axis.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1]
    if n_points < n:
        raise ResolutionError(f"grid of {n_points} points cannot resolve {n} modes")
    pad = np.zeros(coeffs.shape[:-1] + (n_points,))
    pad[..., :n] = coeffs
    return _fft.dst(pad, type=1, axis=-1) / np.sqrt(2.0)


def analyze(values: np.ndarray, n_modes: int) -> np.ndarray:
    """Discrete sine analysis, the exact inverse of :func:`synthesize` for M >= N."""
    values = np.asarray(values, dtype=float)
    m = values.shape[-1]
    if n_modes > m:
        raise ResolutionError(f"{n_modes} modes cannot be recovered from {m} points")
    full = _fft.dst(values, type=1, axis=-1) / (np.sqrt(2.0) * (m + 1))
    return full[..., :n_modes]


def to_grid(u: SpectralField, n_points: int) -> GridField:
    """Synthesize the field on M = n_points uniform interior points (M >= N)."""
    return GridField(synthesize(u.coeffs, n_points))


def from_grid(g: GridField, n_modes: int) -> SpectralField:
    """Recover the leading n_modes coefficients from grid values (N <= M)."""
    return SpectralField(analyze(g.values, n_modes))


def fractional_laplacian_apply(s: float, u: SpectralField) -> SpectralField:
    """Apply (-Laplacian)^(s/2): coefficient-wise multiplication by (pi^2 n^2)^(s/2)."""
    lam = eigenvalues(u.n_modes)
    return SpectralField(lam ** (s / 2.0) * u.coeffs)


def sobolev_norm(s: float, u: SpectralField) -> float:
    """Norm sqrt(sum_n (pi^2 n^2)^s u_n^2); s = 0 gives the L^2 (Parseval) norm."""
    lam = eigenvalues(u.n_modes)
    return float(np.sqrt(np.sum(lam**s * u.coeffs**2)))


def lp_norm(p: float, g: GridField) -> float:
    """Composite-trapezoid L^p norm over (0, 1) with zero boundary values."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    h = 1.0 / (g.n_points + 1)
    return float((h * np.sum(np.abs(g.values) ** p)) ** (1.0 / p))
