"""Two-point calculus on the circle: fractional gradients, pairings, divergences.

A two-point function F(x, y) is sampled on all node pairs and integrated
against dx dy / |x - y| with the chordal distance. The diagonal x = y is a
0/0 cell; kernels built from difference quotients can carry a per-node
``slope`` c(x) with F(x, x + h) ≈ c(x) h / |h|^s, which lets a pairing use
the exact limit of the integrand instead of dropping the cell.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import constants
from .errors import ConfigurationError, DomainError
from .spectral_core import (
    CircleGrid,
    GridField,
    SpectralField,
    analyze,
    riesz_gradient,
    synthesize,
)

__all__ = [
    "OffDiagonalKernel",
    "CjkTable",
    "circle_distance",
    "distance_power",
    "frac_gradient_kernel",
    "pair",
    "gradient_product",
    "lambda_raw",
    "frac_divergence",
    "divergence_symbol",
    "cjk",
    "build_table",
    "product_spectrum",
    "omega_potential",
    "t_functional",
    "divfree_correction",
    "od_norm",
]

log = logging.getLogger(__name__)

BAND_RTOL = 1e-13


def circle_distance(x, y):
    """Chordal distance 2|sin((x - y)/2)|."""
    return 2.0 * np.abs(np.sin((np.asarray(x) - np.asarray(y)) / 2.0))


@lru_cache(maxsize=32)
def _offset_distance(N: int) -> np.ndarray:
    # Built from min(m, N - m) so that the table is exactly symmetric in m.
    m = np.arange(N)
    m = np.minimum(m, N - m)
    d = 2.0 * np.sin(np.pi * m / N)
    d.setflags(write=False)
    return d


@lru_cache(maxsize=16)
def distance_power(N: int, p: float) -> np.ndarray:
    """Matrix |x_i - x_j|^{-p} with zeros on the diagonal (exactly symmetric)."""
    d = _offset_distance(N)
    inv = np.zeros(N)
    inv[1:] = d[1:] ** (-p)
    idx = (np.arange(N)[None, :] - np.arange(N)[:, None]) % N
    out = inv[idx]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=8)
def _offset_index(N: int) -> np.ndarray:
    idx = (np.arange(N)[:, None] + np.arange(N)[None, :]) % N
    idx.setflags(write=False)
    return idx


@dataclass(frozen=True)
class OffDiagonalKernel:
    """Sampled two-point function, values of shape ``(*components, N, N)``.

    ``order`` is the exponent s of the difference quotient the kernel came from
    (the kernel vanishes like |h|^{1-s} at the diagonal when smooth).
    ``slope`` (shape ``(*components, N)``) enables the analytic diagonal limit;
    without it the diagonal policy is ``omit``.
    """

    values: np.ndarray
    grid: CircleGrid
    order: float
    slope: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        N = self.grid.N
        if v.ndim < 3 or v.shape[-2:] != (N, N):
            raise ConfigurationError(f"kernel of shape {v.shape} does not match grid size {N}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.slope is not None:
            c = np.array(self.slope)
            if c.shape != v.shape[:-1]:
                raise ConfigurationError(f"slope of shape {c.shape} does not match kernel {v.shape}")
            c.setflags(write=False)
            object.__setattr__(self, "slope", c)

    @property
    def components(self) -> tuple[int, ...]:
        return self.values.shape[:-2]

    @property
    def diagonal_policy(self) -> str:
        return "omit" if self.slope is None else "limit"

    def __sub__(self, other: "OffDiagonalKernel") -> "OffDiagonalKernel":
        if other.grid != self.grid or other.components != self.components:
            raise ConfigurationError("kernels differ in grid or components")
        slope = None
        if self.slope is not None and other.slope is not None:
            slope = self.slope - other.slope
        return OffDiagonalKernel(self.values - other.values, self.grid, self.order, slope)


def frac_gradient_kernel(f: GridField, s: float, diagonal: str = "omit") -> OffDiagonalKernel:
    """d_s f(x, y) = (f(x) - f(y)) / |x - y|^s, zero on the diagonal.

    ``diagonal="limit"`` attaches the slope -f'(x) (spectral derivative) so that
    pairings of total order 1 can use the exact diagonal value.
    """
    if not 0.0 <= s < 1.0:
        raise DomainError(f"fractional gradient order must lie in [0, 1), got {s}")
    if diagonal not in ("omit", "limit"):
        raise ConfigurationError(f"unknown diagonal policy {diagonal!r}")
    v = f.values
    diff = v[:, :, None] - v[:, None, :]
    values = diff * distance_power(f.grid.N, s)
    slope = None
    if diagonal == "limit":
        slope = -synthesize(riesz_gradient(analyze(f))).values
    return OffDiagonalKernel(values, f.grid, s, slope)


def _contract(F: np.ndarray, G: np.ndarray, cf: tuple, cg: tuple) -> np.ndarray:
    """Pointwise product of kernels with the component contraction rule of ``pair``."""
    if cf == cg:
        return np.sum((F * G).reshape((-1,) + F.shape[len(cf):]), axis=0)[None]
    if cg == (1,):
        return (F * G[0]).reshape((-1,) + F.shape[len(cf):])
    if cf == (1,):
        return (F[0] * G).reshape((-1,) + G.shape[len(cg):])
    if len(cf) == 2 and cf[1:] == cg:
        return np.einsum("ik...,k...->i...", F, G)
    raise ConfigurationError(f"cannot pair kernels with components {cf} and {cg}")


def pair(F: OffDiagonalKernel, G: OffDiagonalKernel, diagonal: str = "omit") -> GridField:
    """(F·G)(x) = ∫ F(x, y) G(x, y) dy / |x - y| by the trapezoidal rule.

    Components are contracted: equal shapes contract fully, a scalar kernel
    multiplies entrywise, and a matrix kernel acts on a vector kernel.
    ``diagonal="limit"`` uses slope_F·slope_G on the diagonal when both kernels
    carry slopes and their orders add to 1 (the integrand limit); for orders
    adding to less than 1 the limit is 0 and the cell is dropped either way.
    """
    if F.grid != G.grid:
        raise ConfigurationError("kernels live on different grids")
    if diagonal not in ("omit", "limit"):
        raise ConfigurationError(f"unknown diagonal policy {diagonal!r}")
    grid = F.grid
    cf, cg = F.components, G.components
    prod = _contract(F.values, G.values, cf, cg)
    out = np.sum(prod * distance_power(grid.N, 1.0), axis=-1)
    if diagonal == "limit" and abs(F.order + G.order - 1.0) < 1e-12:
        if F.slope is None or G.slope is None:
            raise ConfigurationError("diagonal limit requested but a kernel carries no slope")
        out = out + _contract(F.slope[..., None], G.slope[..., None], cf, cg)[..., 0]
    return GridField(grid.weight * out, grid)


def gradient_product(u: GridField, v: GridField, diagonal: str = "limit", block: int = 256) -> GridField:
    """(d_{1/2}u · d_{1/2}v)(x) = ∫ (u(x) - u(y))·(v(x) - v(y)) / |x - y|² dy.

    Same quantity as ``pair`` of the two gradient kernels, computed row block
    by row block so no N x N x n array is stored. The diagonal cell carries
    the limit u'(x)·v'(x) (spectral derivatives) unless ``diagonal="omit"``.
    """
    if u.grid != v.grid or u.n != v.n:
        raise ConfigurationError("gradient_product needs fields with equal grid and components")
    grid = u.grid
    N = grid.N
    a, b = u.values, v.values
    inv2 = distance_power(N, 2.0)
    out = np.empty(N, dtype=np.result_type(a, b))
    for start in range(0, N, block):
        stop = min(start + block, N)
        da = a[:, start:stop, None] - a[:, None, :]
        db = da if b is a else b[:, start:stop, None] - b[:, None, :]
        out[start:stop] = np.sum(np.sum(da * db, axis=0) * inv2[start:stop], axis=-1)
    if diagonal == "limit":
        du = synthesize(riesz_gradient(analyze(u))).values
        dv = du if b is a else synthesize(riesz_gradient(analyze(v))).values
        out = out + np.sum(du * dv, axis=0)
    elif diagonal != "omit":
        raise ConfigurationError(f"unknown diagonal policy {diagonal!r}")
    return GridField(grid.weight * out, grid)


def lambda_raw(u: GridField, diagonal: str = "limit") -> GridField:
    """λ_raw(x) = ∫ |u(x) - u(y)|² / |x - y|² dy, diagonal limit |u'(x)|²."""
    return gradient_product(u, u, diagonal)


def frac_divergence(F: OffDiagonalKernel, s: float, diagonal: str = "extrapolate") -> GridField:
    """div_s F(x) = P.V.∫ (F(x, y) - F(y, x)) / |x - y|^{1+s} dy.

    Contributions at x ± h are added in matched pairs before summation. The
    diagonal cell holds the h → 0 limit of the paired integrand, estimated by
    Richardson extrapolation from the first two offsets (``"extrapolate"``),
    or is dropped (``"omit"``, for which discrete summation by parts against
    ``frac_gradient_kernel`` is exact).
    """
    grid = F.grid
    N = grid.N
    v = F.values.reshape((-1, N, N))
    anti = (v - np.swapaxes(v, -1, -2)) * distance_power(N, 1.0 + s)
    rows = np.take_along_axis(anti, np.broadcast_to(_offset_index(N), anti.shape), axis=-1)
    half = N // 2
    paired = rows[..., 1:half] + rows[..., N - 1 : half : -1]
    total = np.sum(paired, axis=-1) + rows[..., half]
    if diagonal == "extrapolate":
        g1 = 0.5 * paired[..., 0]
        g2 = 0.5 * paired[..., 1]
        total = total + (4.0 * g1 - g2) / 3.0
    elif diagonal != "omit":
        raise ConfigurationError(f"unknown diagonal policy {diagonal!r}")
    return GridField(grid.weight * total, grid)


@lru_cache(maxsize=16)
def divergence_symbol(N: int, s: float = 0.5, diagonal: str = "extrapolate") -> np.ndarray:
    """Discrete symbol σ(k) of h ↦ frac_divergence(frac_gradient_kernel(h, s), s).

    The composite operator is a symmetric circulant, so applying it to a unit
    impulse yields its stencil and the FFT of the stencil its (real) symbol.
    σ(k) → DIV_GRAD·|k| for s = 1/2 as N grows.
    """
    grid = CircleGrid(N)
    delta = np.zeros((1, N))
    delta[0, 0] = 1.0
    col = frac_divergence(frac_gradient_kernel(GridField(delta, grid), s), s, diagonal).values[0]
    sym = np.fft.fft(col).real
    sym.setflags(write=False)
    return sym


# ---------------------------------------------------------------------------
# C(j, k) coefficients


def _cjk_nodes(M: int) -> tuple[np.ndarray, np.ndarray]:
    h = 2.0 * np.pi * np.arange(M) / M
    weight = np.zeros(M)
    weight[1:] = (2.0 * np.pi / M) / (4.0 * np.sin(h[1:] / 2.0) ** 2)
    return h, weight


def _cjk_resolution(jmax: int) -> int:
    # The integrand is a trigonometric polynomial of degree < |j| + |k|, so the
    # trapezoidal rule is exact once M exceeds that degree; 4x for margin.
    M = 16
    while M < 4 * jmax + 8:
        M *= 2
    return M


def cjk(j: int, k: int) -> float:
    """C(j, k) = ∫ (e^{ijh} - 1)(e^{ikh} - 1) / |h|² dh (real part; the integral is real)."""
    j, k = int(j), int(k)
    M = _cjk_resolution(abs(j) + abs(k))
    h, weight = _cjk_nodes(M)
    vals = (np.exp(1j * j * h) - 1.0) * (np.exp(1j * k * h) - 1.0)
    # Diagonal limit of the integrand is -jk.
    return float(np.sum(weight * vals).real + (2.0 * np.pi / M) * (-j * k))


@dataclass(frozen=True)
class CjkTable:
    """C(j, k) for |j|, |k| ≤ J; ``values[j + J, k + J]``."""

    J: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (2 * self.J + 1, 2 * self.J + 1):
            raise ConfigurationError(f"table of shape {v.shape} does not match J = {self.J}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __call__(self, j: int, k: int) -> float:
        if abs(j) > self.J or abs(k) > self.J:
            raise ConfigurationError(f"C({j}, {k}) outside table range J = {self.J}")
        return float(self.values[j + self.J, k + self.J])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "k", "value"])
            for a in range(-self.J, self.J + 1):
                for b in range(-self.J, self.J + 1):
                    w.writerow([a, b, repr(float(self.values[a + self.J, b + self.J]))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "CjkTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        J = max(abs(int(r["j"])) for r in rows)
        v = np.full((2 * J + 1, 2 * J + 1), np.nan)
        for r in rows:
            v[int(r["j"]) + J, int(r["k"]) + J] = float(r["value"])
        if np.isnan(v).any():
            raise ConfigurationError(f"{path}: incomplete C-table")
        return cls(J, v)


def build_table(J: int) -> CjkTable:
    """All C(j, k), |j|, |k| ≤ J, as one weighted Gram product (exactly symmetric)."""
    if J < 0:
        raise DomainError("table size must be non-negative")
    M = _cjk_resolution(2 * J)
    h, weight = _cjk_nodes(M)
    js = np.arange(-J, J + 1)
    A = np.exp(1j * js[:, None] * h[None, :]) - 1.0
    C = ((A * weight) @ A.T).real - (2.0 * np.pi / M) * np.outer(js, js)
    C = 0.5 * (C + C.T)
    return CjkTable(J, C)


def product_spectrum(u: SpectralField, v: SpectralField, table: CjkTable, grid: CircleGrid | None = None) -> SpectralField:
    """Fourier coefficients of (d_{1/2}u · d_{1/2}v)(x), contracted over components.

    coefficient(n) = Σ_j C(j, n - j) û(j)·v̂(n - j). Modes below ``BAND_RTOL``
    times the largest coefficient (transform rounding) do not count towards the
    band-width and are dropped.
    """
    if u.n != v.n or u.grid != v.grid:
        raise ConfigurationError("product_spectrum needs fields with equal components and grid")
    bu = u.bandwidth(BAND_RTOL * float(np.max(np.abs(u.coeffs))))
    bv = v.bandwidth(BAND_RTOL * float(np.max(np.abs(v.coeffs))))
    if max(bu, bv) > table.J:
        raise ConfigurationError(f"C-table with J = {table.J} cannot serve band-widths {bu}, {bv}")
    grid = u.grid if grid is None else grid
    if bu + bv > grid.K:
        raise ConfigurationError(f"product band-width {bu + bv} does not fit a grid of size {grid.N}")
    N0 = u.grid.N
    ju = np.arange(-bu, bu + 1)
    kv = np.arange(-bv, bv + 1)
    uc = u.coeffs[:, ju % N0]
    vc = v.coeffs[:, kv % N0]
    # weights[j, k] = C(j, k) Σ_c û_c(j) v̂_c(k); output index n = j + k.
    weights = table.values[np.ix_(ju + table.J, kv + table.J)] * (uc.T @ vc)
    out = np.zeros(2 * (bu + bv) + 1, dtype=complex)
    for a in range(2 * bu + 1):
        out[a : a + 2 * bv + 1] += weights[a]
    coeffs = np.zeros((1, grid.N), dtype=complex)
    ns = np.arange(-(bu + bv), bu + bv + 1)
    coeffs[0, ns % grid.N] = out
    return SpectralField(coeffs, grid, u.real and v.real)


# ---------------------------------------------------------------------------
# Antisymmetric potential and the three-term remainder


def omega_potential(u: GridField, diagonal: str = "omit") -> OffDiagonalKernel:
    """Ω_ik(x, y) = u^i(x) d_{1/2}u^k(x, y) - u^k(x) d_{1/2}u^i(x, y)."""
    du = frac_gradient_kernel(u, 0.5, diagonal)
    a = u.values[:, None, :, None] * du.values[None, :, :, :]
    omega = a - np.swapaxes(a, 0, 1)
    slope = None
    if du.slope is not None:
        b = u.values[:, None, :] * du.slope[None, :, :]
        slope = b - np.swapaxes(b, 0, 1)
    return OffDiagonalKernel(omega, u.grid, 0.5, slope)


def t_functional(u: GridField, v: GridField, w: GridField) -> GridField:
    """T^i(u, v, w) = HALF Σ_k ∫ d_{1/2}u^i d_{1/4}v^k d_{1/4}w^k dy / |x - y| (diagonal omitted)."""
    if not (u.grid == v.grid == w.grid) or v.n != w.n:
        raise ConfigurationError("t_functional needs fields on one grid with matching v, w components")
    N = u.grid.N
    inv_half = distance_power(N, 0.5)
    inv_quarter = distance_power(N, 0.25)
    inv1 = distance_power(N, 1.0)
    vv = v.values
    ww = w.values
    dv = (vv[:, :, None] - vv[:, None, :]) * inv_quarter
    dw = (ww[:, :, None] - ww[:, None, :]) * inv_quarter
    inner = np.sum(dv * dw, axis=0) * inv1
    du = (u.values[:, :, None] - u.values[:, None, :]) * inv_half
    out = constants.HALF * u.grid.weight * np.sum(du * inner[None], axis=-1)
    return GridField(out, u.grid)


def od_norm(F: OffDiagonalKernel, diagonal: str = "omit") -> float:
    """‖F‖_{L²_od} = (∫∫ |F|² dx dy / |x - y|)^{1/2} over all components.

    The diagonal is omitted by default; ``"limit"`` adds |slope|² there, the
    integrand limit for kernels of order 1/2.
    """
    N = F.grid.N
    sq = np.sum(np.abs(F.values.reshape((-1, N, N))) ** 2, axis=0)
    total = np.sum(sq * distance_power(N, 1.0))
    if diagonal == "limit":
        if F.slope is None or abs(F.order - 0.5) > 1e-12:
            raise ConfigurationError("diagonal limit needs an order-1/2 kernel with a slope")
        total += np.sum(np.abs(F.slope) ** 2)
    elif diagonal != "omit":
        raise ConfigurationError(f"unknown diagonal policy {diagonal!r}")
    return float(np.sqrt(F.grid.weight**2 * total))


def divfree_correction(omega: OffDiagonalKernel, mean_tol: float = 1e-8, return_info: bool = False):
    """Return Ω - d_{1/2}h with h solving div_{1/2}(d_{1/2}h) = div_{1/2}Ω - mean.

    Applied to every component pair i < k and mirrored to k > i, so matrix
    antisymmetry is kept. The solve divides by the discrete symbol of the
    composite operator (see ``divergence_symbol``), which makes the residual
    divergence equal to the subtracted mean up to rounding. A mean above
    ``mean_tol`` (relative to the divergence size) is logged and reported.
    """
    grid = omega.grid
    N = grid.N
    comps = omega.components
    if len(comps) != 2 or comps[0] != comps[1]:
        raise ConfigurationError("divfree_correction expects an n x n matrix kernel")
    n = comps[0]
    sym = divergence_symbol(N, omega.order)
    values = np.array(omega.values)
    slope = None if omega.slope is None else np.array(omega.slope)
    h_all = np.zeros((n, n, N))
    means = np.zeros((n, n))
    div = frac_divergence(omega, omega.order).values.reshape(n, n, N)
    for i in range(n):
        for k in range(i + 1, n):
            g = div[i, k]
            mean = float(np.mean(g))
            means[i, k], means[k, i] = mean, -mean
            scale = float(np.max(np.abs(g))) or 1.0
            if abs(mean) > mean_tol * scale:
                log.warning("divergence of component (%d, %d) has mean %.3e; subtracted", i, k, mean)
            ghat = np.fft.fft(g - mean)
            hhat = np.zeros_like(ghat)
            nz = np.abs(sym) > 0
            nz[0] = False
            hhat[nz] = ghat[nz] / sym[nz]
            h = np.fft.ifft(hhat).real
            dh = frac_gradient_kernel(GridField(h, grid), omega.order, "omit" if slope is None else "limit")
            values[i, k] -= dh.values[0]
            values[k, i] = -values[i, k]
            if slope is not None:
                slope[i, k] -= dh.slope[0]
                slope[k, i] = -slope[i, k]
            h_all[i, k], h_all[k, i] = h, -h
    out = OffDiagonalKernel(values, grid, omega.order, slope)
    if return_info:
        return out, {"h": h_all, "mean": means}
    return out
