"""Spectral representation of functions on the circle and Fourier multipliers.

Coefficients follow û(k) = (1/2π)∫ f e^{-ikx} dx on [0, 2π). A grid of N nodes
carries the modes -K..K with K = N/2 - 1; the Nyquist mode is always dropped so
that real fields keep conjugate-symmetric coefficients.

Coefficient arrays are stored in FFT order (shape ``(n, N)``) with the Nyquist
slot held at zero, which lets every multiplier act by plain broadcasting.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "CircleGrid",
    "GridField",
    "SphereField",
    "SpectralField",
    "SPHERE_TOL",
    "analyze",
    "synthesize",
    "apply_multiplier",
    "fractional_laplacian",
    "riesz_gradient",
    "sobolev_norm",
    "half_energy",
    "heat_propagate",
    "from_modes",
    "identity_map",
    "resample",
]

SPHERE_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CircleGrid:
    """Uniform grid x_j = 2πj/N on the circle."""

    N: int

    def __post_init__(self):
        N = self.N
        if not isinstance(N, (int, np.integer)) or N < 8 or N & (N - 1):
            raise ConfigurationError(f"grid size must be a power of two >= 8, got {N!r}")
        object.__setattr__(self, "N", int(N))

    @property
    def K(self) -> int:
        return self.N // 2 - 1

    @property
    def weight(self) -> float:
        return 2.0 * np.pi / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        return _frozen(2.0 * np.pi * np.arange(self.N) / self.N)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers in FFT order; the Nyquist slot reads 0."""
        k = np.fft.fftfreq(self.N, 1.0 / self.N).round().astype(np.int64)
        k[self.N // 2] = 0
        return _frozen(k)

    @cached_property
    def band_mask(self) -> np.ndarray:
        """True on the retained modes -K..K."""
        m = np.ones(self.N, dtype=bool)
        m[self.N // 2] = False
        return _frozen(m)


@dataclass(frozen=True)
class GridField:
    """Values of an n-component function at the grid nodes, shape ``(n, N)``."""

    values: np.ndarray
    grid: CircleGrid

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[1] != self.grid.N:
            raise ConfigurationError(
                f"field of shape {np.shape(self.values)} does not match a grid of size {self.grid.N}"
            )
        if not np.iscomplexobj(v):
            v = v.astype(float)
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.weight * np.sum(np.abs(self.values) ** 2)))

    def sup_norm(self) -> float:
        return float(np.max(np.sqrt(np.sum(np.abs(self.values) ** 2, axis=0))))


class SphereField(GridField):
    """Grid field with unit Euclidean norm at every node."""

    def __post_init__(self):
        super().__post_init__()
        if self.n < 2:
            raise ConfigurationError("sphere-valued fields need at least two components")
        if not self.is_real:
            raise ConfigurationError("sphere-valued fields are real")
        drift = np.max(np.abs(np.sqrt(np.sum(self.values**2, axis=0)) - 1.0))
        if drift > SPHERE_TOL:
            raise DomainError(f"values leave the unit sphere by {drift:.3e}")

    @classmethod
    def project(cls, values, grid: CircleGrid) -> "SphereField":
        """Pointwise renormalization v / |v|; a vanishing node is a domain error."""
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        norm = np.sqrt(np.sum(v**2, axis=0))
        if np.any(norm == 0.0) or not np.all(np.isfinite(norm)):
            raise DomainError("cannot project a field that vanishes at a node")
        return cls(v / norm, grid)


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of an n-component field, FFT order, shape ``(n, N)``.

    ``real`` records whether the field came from (and synthesizes to) real values.
    """

    coeffs: np.ndarray
    grid: CircleGrid
    real: bool = True

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[None, :]
        if c.ndim != 2 or c.shape[1] != self.grid.N:
            raise ConfigurationError(
                f"coefficient array of shape {np.shape(self.coeffs)} does not match grid size {self.grid.N}"
            )
        c = c.copy()
        c[:, self.grid.N // 2] = 0.0
        object.__setattr__(self, "coeffs", _frozen(c))

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    def coefficient(self, k: int, component: int = 0) -> complex:
        if abs(k) > self.grid.K:
            return 0j
        return complex(self.coeffs[component, k % self.grid.N])

    def bandwidth(self, tol: float = 0.0) -> int:
        """Largest |k| whose coefficient magnitude exceeds ``tol``."""
        mag = np.max(np.abs(self.coeffs), axis=0)
        k = np.abs(self.grid.wavenumbers)[mag > tol]
        return int(k.max()) if k.size else 0

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(coeffs, self.grid, self.real)


def analyze(f: GridField, grid: CircleGrid | None = None) -> SpectralField:
    """Coefficients -K..K of the trigonometric interpolant of ``f``."""
    if grid is not None and grid.N != f.grid.N:
        raise ConfigurationError(f"field has {f.grid.N} nodes but grid has {grid.N}")
    c = np.fft.fft(f.values, axis=-1) / f.grid.N
    return SpectralField(c, f.grid, f.is_real)


def resample(c: SpectralField, grid: CircleGrid) -> SpectralField:
    """Move coefficients to another grid; refuses to drop nonzero modes."""
    if grid.N == c.grid.N:
        return c
    band = c.bandwidth()
    if band > grid.K:
        raise ConfigurationError(f"band-width {band} does not fit a grid of size {grid.N}")
    out = np.zeros((c.n, grid.N), dtype=complex)
    m = min(c.grid.K, grid.K)
    out[:, : m + 1] = c.coeffs[:, : m + 1]
    if m > 0:
        out[:, -m:] = c.coeffs[:, -m:]
    return SpectralField(out, grid, c.real)


def synthesize(c: SpectralField, grid: CircleGrid | None = None) -> GridField:
    """Evaluate the truncated Fourier series at the nodes of ``grid``."""
    grid = c.grid if grid is None else grid
    c = resample(c, grid)
    v = np.fft.ifft(c.coeffs, axis=-1) * grid.N
    return GridField(v.real if c.real else v, grid)


def from_modes(modes: dict[int, complex] | list[dict[int, complex]], grid: CircleGrid, real: bool | None = None) -> SpectralField:
    """Build a field from ``{k: û(k)}`` dictionaries, one per component."""
    if isinstance(modes, dict):
        modes = [modes]
    c = np.zeros((len(modes), grid.N), dtype=complex)
    for i, comp in enumerate(modes):
        for k, a in comp.items():
            if abs(k) > grid.K:
                raise ConfigurationError(f"mode {k} exceeds K = {grid.K}")
            c[i, k % grid.N] = a
    if real is None:
        mirror = np.conj(c[:, (-np.arange(grid.N)) % grid.N])
        real = bool(np.array_equal(c, mirror))
    return SpectralField(c, grid, real)


def identity_map(grid: CircleGrid, degree: int = 1, n: int = 2) -> SphereField:
    """u(x) = (cos qx, sin qx, 0, ...)."""
    x = grid.nodes
    v = np.zeros((n, grid.N))
    v[0] = np.cos(degree * x)
    v[1] = np.sin(degree * x)
    return SphereField(v, grid)


def apply_multiplier(f: SpectralField, symbol: np.ndarray) -> SpectralField:
    """Multiply coefficient k by ``symbol[k]`` (FFT-ordered, length N).

    Real fields stay real only for even real symbols; callers pass the flag
    through because every multiplier used here is even or odd-imaginary.
    """
    return f.with_coeffs(f.coeffs * symbol[None, :])


def _abs_k(grid: CircleGrid) -> np.ndarray:
    return np.abs(grid.wavenumbers).astype(float)


def fractional_laplacian(f: SpectralField, s: float) -> SpectralField:
    """(-Δ)^s as the multiplier |k|^{2s}; the zero mode is annihilated."""
    if s <= 0:
        raise DomainError(f"fractional order must be positive, got {s}")
    k = _abs_k(f.grid)
    return apply_multiplier(f, k ** (2.0 * s))


def riesz_gradient(f: SpectralField) -> SpectralField:
    """Spatial derivative as the multiplier ik."""
    return apply_multiplier(f, 1j * f.grid.wavenumbers.astype(float))


def sobolev_norm(f: SpectralField, s: float, homogeneous: bool = False) -> float:
    """H^s norm with weight (1+n²)^s, or Ḣ^s with weight |n|^{2s}.

    Both carry the Parseval factor 2π. For homogeneous norms the zero mode is
    excluded (its weight is 0 for s > 0 and undefined for s <= 0).
    """
    k = _abs_k(f.grid)
    if homogeneous:
        w = np.zeros_like(k)
        nz = k > 0
        w[nz] = k[nz] ** (2.0 * s)
    else:
        w = (1.0 + k**2) ** s
    w[f.grid.N // 2] = 0.0
    total = np.sum(np.sum(np.abs(f.coeffs) ** 2, axis=0) * w)
    return float(np.sqrt(2.0 * np.pi * total))


def half_energy(u: GridField | SpectralField) -> float:
    """E(u) = ½∫|(-Δ)^{1/4}u|² = π Σ_k |k| |û(k)|² summed over components."""
    c = analyze(u) if isinstance(u, GridField) else u
    k = _abs_k(c.grid)
    return float(np.pi * np.sum(np.sum(np.abs(c.coeffs) ** 2, axis=0) * k))


def heat_propagate(f: SpectralField, t: float) -> SpectralField:
    """Fractional heat semigroup e^{-t(-Δ)^{1/2}}: multiply by e^{-|k|t}."""
    if t < 0:
        raise DomainError(f"heat propagation needs t >= 0, got {t}")
    return apply_multiplier(f, np.exp(-_abs_k(f.grid) * t))
