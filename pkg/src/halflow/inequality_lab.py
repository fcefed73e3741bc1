"""Numerical checks of the inequalities and identities behind the flow.

Every check returns a ``RatioReport``: per-sample left and right sides, their
ratios, the largest ratio (an empirical constant where the inequality has no
explicit one), a refinement-stability flag and a verdict. Inequalities of the
form "A ≲ B" are checked as finiteness plus stability of the measured constant;
no constant is asserted unless it is derived here.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import constants
from .errors import CheckRefused, ConfigurationError, DomainError
from .flow_solver import Trajectory, local_energy_profile
from .fractional_calculus import (
    build_table,
    frac_divergence,
    frac_gradient_kernel,
    gradient_product,
    od_norm,
    omega_potential,
    pair,
    product_spectrum,
)
from .spectral_core import (
    CircleGrid,
    GridField,
    SpectralField,
    SphereField,
    analyze,
    fractional_laplacian,
    half_energy,
    sobolev_norm,
    synthesize,
)

__all__ = [
    "SampleFamily",
    "RatioReport",
    "ladyzhenskaya_report",
    "fracgrad_constant",
    "wente_report",
    "product_regularity_report",
    "holder_laplacian_probe",
    "holder_probe_values",
    "stereographic_check",
    "stereographic_sides",
    "bump",
    "mollify_project",
    "mollify",
    "approximation_report",
    "local_content",
    "jump_map",
    "local_l4_monitor",
    "local_energy_monitor",
    "norm_equivalence_report",
    "lp_partition",
    "triebel_lizorkin_norm",
    "gagliardo_norm",
    "arc_integral",
]


# ---------------------------------------------------------------------------
# Sample families and reports


@dataclass(frozen=True)
class SampleFamily:
    """Seeded family of real trigonometric polynomials.

    Sample i uses the i-th child of ``SeedSequence(seed)``; mode k gets complex
    normal amplitudes times k^{-decay}. Coefficients do not depend on the grid,
    so the same family can be placed on several resolutions.
    ``generator``: ``"trig"`` (modes 1..band) or ``"trig0"`` (also a random mean).
    """

    generator: str = "trig"
    seed: int = 0
    count: int = 10
    band: int = 8
    n: int = 1
    decay: float = 1.0

    def coefficients(self) -> list[np.ndarray]:
        """Per sample, an array ``(n, 2*band+1)`` for modes -band..band."""
        if self.generator not in ("trig", "trig0"):
            raise ConfigurationError(f"unknown sample generator {self.generator!r}")
        out = []
        k = np.arange(1, self.band + 1)
        for child in np.random.SeedSequence(self.seed).spawn(self.count):
            rng = np.random.default_rng(child)
            amp = (rng.standard_normal((self.n, self.band)) + 1j * rng.standard_normal((self.n, self.band))) * k ** (-self.decay)
            c = np.zeros((self.n, 2 * self.band + 1), dtype=complex)
            c[:, self.band + 1 :] = amp
            c[:, : self.band] = np.conj(amp[:, ::-1])
            if self.generator == "trig0":
                c[:, self.band] = rng.standard_normal(self.n)
            out.append(c)
        return out

    def spectral(self, grid: CircleGrid) -> list[SpectralField]:
        if self.band > grid.K:
            raise ConfigurationError(f"band {self.band} does not fit a grid of size {grid.N}")
        fields = []
        ks = np.arange(-self.band, self.band + 1) % grid.N
        for c in self.coefficients():
            full = np.zeros((self.n, grid.N), dtype=complex)
            full[:, ks] = c
            fields.append(SpectralField(full, grid))
        return fields

    def fields(self, grid: CircleGrid) -> list[GridField]:
        return [synthesize(c) for c in self.spectral(grid)]


@dataclass
class RatioReport:
    name: str
    params: dict
    seed: int | None
    lhs: list[float] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    max_ratio: float = math.nan
    stable: bool | None = None
    verdict: str = "fail"
    tolerance: str = ""
    anchor: str = ""
    notes: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def measured(self) -> float:
        return self.extra.get("measured", self.max_ratio)

    def finalize(self) -> "RatioReport":
        finite = [r for r in self.ratios if math.isfinite(r)]
        self.max_ratio = max(finite) if finite else math.nan
        return self

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _relative_change(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


# ---------------------------------------------------------------------------
# Helpers on band-limited fields


def _padded_values(c: SpectralField, factor: int) -> GridField:
    return synthesize(c, CircleGrid(c.grid.N * factor))


def lp_norm(c: SpectralField, p: int) -> float:
    """‖f‖_{L^p} for even integer p, exact for band-limited f via a padded grid."""
    if p % 2:
        raise DomainError("exact L^p norms need an even exponent")
    # |f|^2 has twice the band of f; a grid p/2 times finer resolves |f|^p.
    factor = 1 << max(0, math.ceil(math.log2(p // 2)))
    v = _padded_values(c, factor)
    dens = np.sum(np.abs(v.values) ** 2, axis=0) ** (p // 2)
    return float((v.grid.weight * np.sum(dens)) ** (1.0 / p))


def arc_integral(density: np.ndarray, grid: CircleGrid, x0, R: float) -> np.ndarray:
    """∫_{B_R(x0)} w for a trigonometric polynomial w sampled on ``grid`` (band < N/2)."""
    what = np.fft.fft(density) / grid.N
    k = grid.wavenumbers.astype(float)
    what[grid.N // 2] = 0.0
    arc = np.where(k == 0, 2.0 * R, 2.0 * np.sin(k * R) / np.where(k == 0, 1.0, k))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    return (np.exp(1j * np.outer(x0, k)) @ (what * arc)).real


# ---------------------------------------------------------------------------
# Ladyzhenskaya


def ladyzhenskaya_report(family: SampleFamily, N: int = 512, rel_tol: float = 1e-10) -> RatioReport:
    """Coefficient-level step ‖u‖²_{H^{1/4}} ≤ ‖u‖_{L²}‖u‖_{H^{1/2}} and the L⁴ embedding ratio."""
    grid = CircleGrid(N)
    rep = RatioReport("ladyzhenskaya", {"N": N, **asdict(family)}, family.seed,
                      tolerance=f"zero violations at relative {rel_tol:g}", anchor="Ladyzhenskaya inequality, Cauchy-Schwarz step")
    violations = 0
    embed = []
    for c in family.spectral(grid):
        lhs = sobolev_norm(c, 0.25) ** 2
        rhs = sobolev_norm(c, 0.0) * sobolev_norm(c, 0.5)
        rep.lhs.append(lhs)
        rep.rhs.append(rhs)
        rep.ratios.append(lhs / rhs if rhs > 0 else math.nan)
        if lhs > rhs * (1.0 + rel_tol):
            violations += 1
        h14 = sobolev_norm(c, 0.25)
        embed.append(lp_norm(c, 4) / h14 if h14 > 0 else math.nan)
    rep.finalize()
    finite = [e for e in embed if math.isfinite(e)]
    rep.extra.update({
        "violations": violations,
        "embedding_ratios": embed,
        "embedding_constant": max(finite) if finite else math.nan,
        "measured": max(finite) if finite else math.nan,
    })
    rep.verdict = "pass" if violations == 0 and finite else "fail"
    return rep


# ---------------------------------------------------------------------------
# Fractional gradient energy constant


def fracgrad_constant(family: SampleFamily | list[GridField], N: int = 1024, rel_tol: float = 1e-3) -> RatioReport:
    """∫∫|d_{1/2}u|² dx dy/|x-y| over ‖(-Δ)^{1/4}u‖²; expected FRACGRAD_ENERGY."""
    grid = CircleGrid(N)
    fields = family.fields(grid) if isinstance(family, SampleFamily) else list(family)
    seed = family.seed if isinstance(family, SampleFamily) else None
    rep = RatioReport("fracgrad_constant", {"N": N}, seed, tolerance=f"ratio = 2π ± {rel_tol:g} relative",
                      anchor="fractional gradient energy equivalence")
    target = constants.FRACGRAD_ENERGY
    worst = 0.0
    for f in fields:
        rhs = 2.0 * half_energy(f)
        if rhs == 0.0:
            rep.notes.append("constant sample skipped (0/0)")
            continue
        lhs = f.grid.weight * float(np.sum(gradient_product(f, f).values))
        rep.lhs.append(lhs)
        rep.rhs.append(rhs)
        rep.ratios.append(lhs / rhs)
        worst = max(worst, abs(lhs / rhs - target) / target)
    rep.finalize()
    rep.extra.update({"max_relative_deviation": worst, "target": target, "measured": rep.max_ratio})
    rep.verdict = "pass" if rep.ratios and worst <= rel_tol else "fail"
    return rep


# ---------------------------------------------------------------------------
# Wente-type estimate


def _wente_ratios(u: GridField, g_fields: list[GridField], div_tol: float):
    F = omega_potential(u, "limit")
    div = float(np.max(np.abs(frac_divergence(F, 0.5).values)))
    if div > div_tol:
        raise CheckRefused(f"potential divergence {div:.3e} exceeds {div_tol:g}; apply divfree_correction first")
    Fnorm = od_norm(F, diagonal="limit")
    rows = []
    for g in g_fields:
        P = pair(F, frac_gradient_kernel(g, 0.5, "limit"), "limit")
        c = analyze(P)
        centered = c.with_coeffs(np.where(c.grid.wavenumbers[None, :] == 0, 0.0, c.coeffs))
        lhs_h = sobolev_norm(centered, -0.5)
        lhs_hdot = sobolev_norm(centered, -0.5, homogeneous=True)
        gc = analyze(g)
        rows.append((lhs_h, lhs_hdot, Fnorm * sobolev_norm(gc, 0.5), Fnorm * sobolev_norm(gc, 0.5, homogeneous=True)))
    return rows, div, Fnorm


def wente_report(
    u_source: GridField | str = "identity",
    g_family: SampleFamily | None = None,
    resolutions: tuple[int, int] = (512, 1024),
    div_tol: float = 1e-3,
    stability: float = 0.05,
) -> RatioReport:
    """‖F·d_{1/2}g - c‖_{H^{-1/2}} / (‖F‖_{L²_od}‖g‖_{H^{1/2}}) with F the antisymmetric potential.

    ``u_source`` is either a field on the coarsest grid or ``"identity"``.
    Both H and Ḣ versions are reported; the verdict uses the inhomogeneous one.
    """
    g_family = g_family or SampleFamily("trig", seed=0, count=50, band=64, n=1)
    rep = RatioReport("wente", {"resolutions": list(resolutions), "div_tol": div_tol, **asdict(g_family)}, g_family.seed,
                      tolerance=f"finite, max ratio stable within {stability:.0%} under N-doubling", anchor="Wente-type estimate")
    per_res = {}
    for N in resolutions:
        grid = CircleGrid(N)
        if isinstance(u_source, str):
            if u_source != "identity":
                raise ConfigurationError(f"unknown potential source {u_source!r}")
            from .spectral_core import identity_map

            u = identity_map(grid)
        else:
            u = synthesize(analyze(u_source), grid)
        try:
            rows, div, Fnorm = _wente_ratios(u, g_family.fields(grid), div_tol)
        except CheckRefused as exc:
            rep.verdict = "refused"
            rep.notes.append(str(exc))
            return rep
        per_res[N] = {"rows": rows, "divergence": div, "F_od_norm": Fnorm}
    fine = per_res[resolutions[-1]]["rows"]
    for lh, lhd, rh, rhd in fine:
        rep.lhs.append(lh)
        rep.rhs.append(rh)
        rep.ratios.append(lh / rh if rh > 0 else math.nan)
    rep.finalize()
    maxima = {N: max((r[0] / r[2] for r in v["rows"] if r[2] > 0), default=math.nan) for N, v in per_res.items()}
    maxima_dot = {N: max((r[1] / r[3] for r in v["rows"] if r[3] > 0), default=math.nan) for N, v in per_res.items()}
    if all(math.isnan(m) for m in maxima.values()):
        rep.verdict = "skipped"
        rep.notes.append("right side vanishes for every sample (F = 0 or g constant); ratios skipped")
        rep.extra.update({"lhs_max": max((r[0] for r in fine), default=0.0), "measured": math.nan})
        return rep
    change = _relative_change(maxima[resolutions[0]], maxima[resolutions[-1]])
    rep.stable = change <= stability
    rep.extra.update({
        "max_ratio_by_N": maxima,
        "max_ratio_homogeneous_by_N": maxima_dot,
        "relative_change": change,
        "divergence_by_N": {N: v["divergence"] for N, v in per_res.items()},
        "F_od_norm_by_N": {N: v["F_od_norm"] for N, v in per_res.items()},
        "wente_constant": rep.max_ratio,
        "measured": rep.max_ratio,
    })
    finite = all(math.isfinite(r) for r in rep.ratios)
    rep.verdict = "pass" if finite and rep.stable else "fail"
    return rep


# ---------------------------------------------------------------------------
# Product regularity


def _multiplier_norm(c: SpectralField, a: float) -> float:
    """‖(-Δ)^a f‖_{L²}."""
    return sobolev_norm(c, 2.0 * a, homogeneous=True)


def product_regularity_report(
    u_family: SampleFamily,
    v_family: SampleFamily,
    s: float = 0.5,
    eps: float = 0.125,
    N: int = 1024,
    growth_tol: float = 0.05,
) -> RatioReport:
    """‖d_{1/2}u·d_{1/2}v‖_{Ḣ^s} against the two multiplier right sides.

    The left side comes from ``product_spectrum``. The check is repeated with
    the families truncated to band-widths B, 2B, ... up to N/8; it passes when
    all ratios are finite and the largest ratio does not grow by more than
    ``growth_tol`` over the final band doubling.
    """
    if not 0.0 < s < 1.5:
        raise DomainError(f"smoothness s must lie in (0, 3/2), got {s}")
    if eps <= 0:
        raise DomainError("eps must be positive")
    grid = CircleGrid(N)
    rep = RatioReport("product_regularity", {"s": s, "eps": eps, "N": N, "u": asdict(u_family), "v": asdict(v_family)},
                      u_family.seed, tolerance=f"finite; max ratio growth <= {growth_tol:.0%} over the last band doubling",
                      anchor="regularity of the half-gradient product")
    bands = []
    B = min(u_family.band, v_family.band)
    while B <= N // 8:
        bands.append(B)
        B *= 2
    if not bands:
        raise ConfigurationError(f"family band-width exceeds N/8 = {N // 8}")
    table = build_table(bands[-1])
    a1 = 0.25 + s / 2 + eps
    a2 = 0.25 + s / 2 + 2 * eps
    by_band = {}
    for B in bands:
        uf = SampleFamily(u_family.generator, u_family.seed, u_family.count, B, u_family.n, u_family.decay).spectral(grid)
        vf = SampleFamily(v_family.generator, v_family.seed, v_family.count, B, v_family.n, v_family.decay).spectral(grid)
        rows = []
        for u, v in zip(uf, vf):
            prod = product_spectrum(u, v, table)
            lhs = sobolev_norm(prod, s, homogeneous=True)
            r1 = _multiplier_norm(u, a1) * _multiplier_norm(v, 0.5) + _multiplier_norm(u, 0.5) * _multiplier_norm(v, a1)
            r2 = _multiplier_norm(u, a2) * _multiplier_norm(v, 0.5 - eps) + _multiplier_norm(u, 0.5 - eps) * _multiplier_norm(v, a2)
            rows.append((lhs, r1, r2))
        by_band[B] = rows
    last = by_band[bands[-1]]
    for lhs, r1, r2 in last:
        rep.lhs.append(lhs)
        rep.rhs.append(r1)
        rep.ratios.append(lhs / r1 if r1 > 0 else math.nan)
    rep.finalize()
    max1 = {B: max((r[0] / r[1] for r in rows if r[1] > 0), default=math.nan) for B, rows in by_band.items()}
    max2 = {B: max((r[0] / r[2] for r in rows if r[2] > 0), default=math.nan) for B, rows in by_band.items()}
    finite = all(math.isfinite(x) for x in list(max1.values()) + list(max2.values()))
    if len(bands) >= 2:
        g1 = max1[bands[-1]] / max1[bands[-2]] - 1.0
        g2 = max2[bands[-1]] / max2[bands[-2]] - 1.0
        rep.stable = g1 <= growth_tol and g2 <= growth_tol
    else:
        g1 = g2 = math.nan
        rep.stable = None
        rep.notes.append("only one band-width fits below N/8; stability not assessed")
    rep.extra.update({"max_ratio_first_form_by_band": max1, "max_ratio_second_form_by_band": max2,
                      "growth_last_doubling": [g1, g2], "measured": max(max1[bands[-1]], max2[bands[-1]])})
    rep.verdict = "pass" if finite and rep.stable is not False else "fail"
    return rep


# ---------------------------------------------------------------------------
# Hölder probe


def _pv_fractional(values: np.ndarray, s: float) -> np.ndarray:
    """c_s P.V.∫ (f(x) - f(y)) / |x - y|^{1+2s} dy on the grid, all nodes at once.

    The sum over y ≠ x is a circulant convolution (FFT). c_s is fixed so the
    discrete operator maps e^{ix} to e^{ix} exactly at this resolution.
    """
    N = values.shape[-1]
    m = np.arange(N)
    d = 2.0 * np.sin(np.pi * np.minimum(m, N - m) / N)
    kern = np.zeros(N)
    kern[1:] = d[1:] ** (-1.0 - 2.0 * s)
    w = 2.0 * np.pi / N
    total = np.sum(kern)
    conv = np.fft.ifft(np.fft.fft(values) * np.fft.fft(kern)).real
    raw = w * (values * total - conv)
    c_s = 1.0 / (w * np.sum((1.0 - np.cos(2.0 * np.pi * m / N)) * kern))
    return c_s * raw


def holder_probe_values(alpha: float, s: float, resolutions, amplitude: float = 1.0) -> list[float]:
    """‖(-Δ)^s u_α‖_∞ for u_α = amplitude·|sin(x/2)|^α at each resolution."""
    out = []
    for N in resolutions:
        x = CircleGrid(int(N)).nodes
        u = amplitude * np.abs(np.sin(x / 2.0)) ** alpha
        out.append(float(np.max(np.abs(_pv_fractional(u, s)))))
    return out


def holder_laplacian_probe(alpha: float, s: float, resolutions=tuple(2**m for m in range(10, 17)), variation: float = 0.10) -> RatioReport:
    """Is ‖(-Δ)^s u_α‖_∞ bounded in N? Stabilization means the relative change
    over each of the last two doublings is at most ``variation``.

    The verdict asserts stabilization when 2s < α and monotone growth without
    stabilization when 2s > α (the converse direction is an extra probe).
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"Hölder exponent must lie in (0, 1), got {alpha}")
    if not 0.0 < s < 0.5:
        raise DomainError(f"order s must lie in (0, 1/2), got {s}")
    vals = holder_probe_values(alpha, s, resolutions)
    changes = [_relative_change(vals[i], vals[i + 1]) for i in range(len(vals) - 1)]
    stabilizes = len(changes) >= 2 and all(c <= variation for c in changes[-2:])
    increasing = all(vals[i + 1] > vals[i] for i in range(len(vals) - 1))
    expected = 2.0 * s < alpha
    rep = RatioReport("holder_probe", {"alpha": alpha, "s": s, "resolutions": [int(n) for n in resolutions]}, None,
                      lhs=vals, tolerance=f"variation <= {variation:.0%} over the last two doublings iff 2s < alpha",
                      anchor="bounded fractional Laplacian of Hölder maps")
    rep.stable = stabilizes
    doubled = holder_probe_values(alpha, s, resolutions[-1:], amplitude=2.0)[0]
    rep.extra.update({"changes": changes, "increasing": increasing, "expected_bounded": expected,
                      "amplitude_doubling_ratio": doubled / vals[-1], "measured": vals[-1]})
    if expected:
        rep.verdict = "pass" if stabilizes else "fail"
    else:
        rep.verdict = "pass" if (increasing and not stabilizes) else "fail"
    rep.max_ratio = vals[-1]
    return rep


# ---------------------------------------------------------------------------
# Stereographic identity


def _eval_trig(coeffs: np.ndarray, band: int, theta: np.ndarray) -> np.ndarray:
    """Evaluate Σ_{|k|≤band} c_k e^{ikθ} (rows of ``coeffs``) at arbitrary angles; real part."""
    z = np.exp(1j * theta)
    out = np.zeros((coeffs.shape[0], theta.size), dtype=complex)
    out += coeffs[:, band][:, None]
    zk = np.ones_like(z)
    for k in range(1, band + 1):
        zk = zk * z
        out += coeffs[:, band + k][:, None] * zk + coeffs[:, band - k][:, None] * np.conj(zk)
    return out.real


def _band_coeffs(u: GridField) -> tuple[np.ndarray, int]:
    c = analyze(u)
    band = c.bandwidth(1e-13 * max(1.0, float(np.max(np.abs(c.coeffs)))))
    ks = np.arange(-band, band + 1) % u.grid.N
    return c.coeffs[:, ks], band


def stereographic_sides(u: GridField, theta0: float, L: float = 1e3, step: float = 1e-3, circle_nodes: int = 4096) -> dict:
    """Line and circle sides of the stereographic identity at base angle θ0.

    Line: ∫_{-L}^{L} |v(x0) - v(y)|²/|x0 - y|² dy with v = u∘Π⁻¹, x0 = Π(θ0),
    Π(θ) = cos θ/(1 + sin θ), on a uniform grid through x0 (the singular cell
    takes the limit |v'(x0)|²). Circle: ∫ |u(θ0) - u(y)|²/|θ0 - y|² dy (chordal)
    times (1 + sin θ0), on nodes through θ0 with limit |u'(θ0)|².
    """
    coeffs, band = _band_coeffs(u)
    x0 = math.cos(theta0) / (1.0 + math.sin(theta0))
    m_lo = math.ceil((-L - x0) / step)
    m_hi = math.floor((L - x0) / step)
    m = np.arange(m_lo, m_hi + 1)
    y = x0 + m * step
    theta = math.pi / 2 - 2.0 * np.arctan(y)
    v = _eval_trig(coeffs, band, theta)
    v0 = _eval_trig(coeffs, band, np.array([theta0]))[:, 0]
    k = np.arange(-band, band + 1)
    du0 = (coeffs * (1j * k)[None, :] * np.exp(1j * k * theta0)[None, :]).sum(axis=1).real
    # dθ/dy = -2/(1 + y²) = -(1 + sin θ) at the base point.
    dv0 = du0 * (-(1.0 + math.sin(theta0)))
    integrand = np.zeros(y.size)
    nz = m != 0
    diff = v[:, nz] - v0[:, None]
    integrand[nz] = np.sum(diff * diff, axis=0) / (y[nz] - x0) ** 2
    integrand[~nz] = float(np.sum(dv0 * dv0))
    line = step * (np.sum(integrand) - 0.5 * (integrand[0] + integrand[-1]))
    # ‖v‖_∞ = ‖u‖_∞ <= Σ_k |c_k| (rigorous for a trigonometric polynomial).
    sup_v = float(np.sum(np.sqrt(np.sum(np.abs(coeffs) ** 2, axis=0))))
    tail = 4.0 * sup_v**2 * (1.0 / (y[-1] - x0) + 1.0 / (x0 - y[0]))
    M = max(circle_nodes, 4 * band + 8)
    ys = theta0 + 2.0 * np.pi * np.arange(1, M) / M
    uc = _eval_trig(coeffs, band, ys)
    dc = uc - v0[:, None]
    chord = 2.0 * np.abs(np.sin((ys - theta0) / 2.0))
    circle = (2.0 * np.pi / M) * (np.sum(np.sum(dc * dc, axis=0) / chord**2) + float(np.sum(du0 * du0)))
    return {"theta0": theta0, "x0": x0, "line": float(line), "circle": float(circle * (1.0 + math.sin(theta0))),
            "tail_budget": float(tail), "circle_raw": float(circle)}


def stereographic_check(maps: list[GridField], base_points, L: float = 1e3, step: float = 1e-3, tol: float = 1e-3) -> RatioReport:
    """Agreement of the stereographic identity within ``tol`` + tail budget."""
    rep = RatioReport("stereographic", {"L": L, "step": step, "base_points": list(map(float, base_points)), "maps": len(maps)}, None,
                      tolerance=f"|line - circle| <= {tol:g} + tail budget", anchor="stereographic identity")
    for th in base_points:
        gap = abs(((th + math.pi / 2) + math.pi) % (2 * math.pi) - math.pi)
        if gap < 0.2:
            rep.verdict = "refused"
            rep.notes.append(f"base point {th} lies within 0.2 of the projection pole")
            return rep
    worst = 0.0
    ok = True
    rows = []
    for i, u in enumerate(maps):
        for th in base_points:
            r = stereographic_sides(u, float(th), L, step)
            err = abs(r["line"] - r["circle"])
            budget = tol + r["tail_budget"]
            ok &= err <= budget
            worst = max(worst, err / budget)
            rep.lhs.append(r["line"])
            rep.rhs.append(r["circle"])
            rep.ratios.append(r["line"] / r["circle"] if r["circle"] > 0 else math.nan)
            rows.append({"map": i, **r, "error": err, "budget": budget})
    rep.finalize()
    rep.extra.update({"rows": rows, "worst_error_over_budget": worst, "measured": worst})
    rep.verdict = "pass" if ok else "fail"
    return rep


# ---------------------------------------------------------------------------
# Mollify and project


def bump(x: np.ndarray) -> np.ndarray:
    """Unnormalized C^∞ bump exp(-1/(1 - x²)) on (-1, 1), zero elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def _bump_mass() -> float:
    from scipy.integrate import quad

    return quad(lambda t: math.exp(-1.0 / (1.0 - t * t)), -1.0, 1.0)[0]


def _mollifier_weights(grid: CircleGrid, eps: float) -> np.ndarray:
    """ρ_ε at the node offsets, normalized to discrete unit mass (w Σ ρ_ε = 1)."""
    m = np.arange(grid.N)
    offs = 2.0 * np.pi * np.where(m <= grid.N // 2, m, m - grid.N) / grid.N
    rho = bump(offs / eps)
    total = grid.weight * np.sum(rho)
    if total == 0.0:
        raise DomainError(f"mollifier radius {eps} is below the grid spacing")
    return rho / total


def mollify(u: GridField, eps: float) -> GridField:
    """Periodic convolution ρ_ε ∗ u on the grid."""
    if not 0.0 < eps < 1.0:
        raise DomainError(f"mollifier radius must lie in (0, 1), got {eps}")
    rho = _mollifier_weights(u.grid, eps)
    conv = np.fft.ifft(np.fft.fft(u.values, axis=-1) * np.fft.fft(rho)[None, :], axis=-1).real * u.grid.weight
    return GridField(conv, u.grid)


def mollify_project(u: GridField, eps: float) -> SphereField:
    """u_ε = π(ρ_ε ∗ u); a vanishing convolution is refused."""
    m = mollify(u, eps)
    norm = np.sqrt(np.sum(m.values**2, axis=0))
    if np.min(norm) <= 1e-12:
        raise CheckRefused(f"ρ_ε ∗ u vanishes at a node for eps = {eps}; eps too large for this map")
    return SphereField.project(m.values, u.grid)


def jump_map(grid: CircleGrid, angle: float = math.pi / 2, n: int = 2) -> GridField:
    """Two-valued map: e_1 on [0, π), (cos a, sin a, 0, ...) on [π, 2π)."""
    v = np.zeros((n, grid.N))
    left = grid.nodes < math.pi
    v[0, left] = 1.0
    v[0, ~left] = math.cos(angle)
    v[1, ~left] = math.sin(angle)
    return GridField(v, grid)


def local_content(u: GridField, eps: float) -> np.ndarray:
    """∫∫_{B_ε(x)²} |u(y) - u(z)|² / |y - z|² dy dz at each node x (diagonal omitted)."""
    grid = u.grid
    N = grid.N
    m = int(math.floor(eps / (2.0 * math.pi / N) + 1e-12))
    out = np.zeros(N)
    v = u.values
    for d in range(1, 2 * m + 1):
        diff = v - np.roll(v, -d, axis=1)
        e = np.sum(diff * diff, axis=0) / (2.0 * math.sin(math.pi * d / N)) ** 2
        # pairs (i + a, i + a + d) with -m <= a <= m - d
        cs = np.concatenate([[0.0], np.cumsum(np.concatenate([e, e, e]))])
        idx = np.arange(N) + N
        out += 2.0 * (cs[idx + m - d + 1] - cs[idx - m])
    return grid.weight**2 * out


def approximation_report(u: GridField, eps_schedule=tuple(2.0**-m for m in range(3, 8)), label: str = "") -> RatioReport:
    """Track sup-distance of ρ_ε ∗ u to the sphere and ‖u_ε - u‖_{H^{1/2}} along ε.

    Both must decrease along the schedule. The pointwise bound
    dist(x) ≤ C·(local content on B_ε(x))^{1/2} is measured; 2·max ρ_ε·ε is the
    constant it must respect (sup of the discrete mollifier times the arc width).
    """
    grid = u.grid
    rep = RatioReport("approximation", {"N": grid.N, "eps": list(eps_schedule), "label": label}, None,
                      tolerance="distance and H^1/2 error decrease along the schedule", anchor="mollify-and-project approximation")
    cu = analyze(u)
    dists, errs, consts, bounds = [], [], [], []
    floor = 4.0 * 2.0 * math.pi / grid.N
    for eps in eps_schedule:
        m = mollify(u, eps)
        norm = np.sqrt(np.sum(m.values**2, axis=0))
        dist = np.abs(1.0 - norm)
        ue = mollify_project(u, eps)
        err = sobolev_norm(analyze(ue).with_coeffs(analyze(ue).coeffs - cu.coeffs), 0.5)
        content = local_content(u, eps)
        mask = content > 1e-300
        C = float(np.max(dist[mask] / np.sqrt(content[mask]))) if np.any(mask) else 0.0
        rho = _mollifier_weights(grid, eps)
        dists.append(float(np.max(dist)))
        errs.append(err)
        consts.append(C)
        bounds.append(2.0 * float(np.max(rho)) * eps)
    rep.lhs = dists
    rep.rhs = errs
    rep.ratios = consts
    rep.finalize()
    dec_d = all(dists[i + 1] < dists[i] for i in range(len(dists) - 1))
    dec_e = all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
    bound_ok = all(c <= b * (1 + 1e-9) for c, b in zip(consts, bounds))
    rep.extra.update({
        "distance": dists, "h_half_error": errs, "content_constant": consts, "content_bound": bounds,
        "distance_decreasing": dec_d, "error_decreasing": dec_e, "bound_respected": bound_ok,
        "below_resolution_floor": [eps < floor for eps in eps_schedule], "measured": max(consts) if consts else math.nan,
    })
    rep.verdict = "pass" if dec_d and dec_e and bound_ok else "fail"
    return rep


# ---------------------------------------------------------------------------
# Local-energy monitors on trajectories


def _density_coeff_grid(u: GridField, power: int) -> tuple[np.ndarray, CircleGrid]:
    """|(-Δ)^{1/4}u|^{power} sampled on a grid fine enough to integrate it exactly."""
    fine = CircleGrid(u.grid.N * power)
    vals = synthesize(fractional_laplacian(analyze(u), 0.25), fine).values
    return np.sum(vals * vals, axis=0) ** (power // 2), fine


def _half_density_sq(u: GridField) -> tuple[np.ndarray, CircleGrid]:
    fine = CircleGrid(u.grid.N * 2)
    vals = synthesize(fractional_laplacian(analyze(u), 0.5), fine).values
    return np.sum(vals * vals, axis=0), fine


def _trapezoid(t: np.ndarray, y: np.ndarray) -> float:
    if t.size < 2:
        return 0.0
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def _l4_sides(traj: Trajectory, x0: float, R: float) -> dict:
    t = traj.times
    lhs_t, sup_local, half_local, quarter_global, lhs_global_t, sup_all = [], [], [], [], [], []
    for s in traj.states:
        d4, g4 = _density_coeff_grid(s.u, 4)
        d2, g2 = _density_coeff_grid(s.u, 2)
        h2, gh = _half_density_sq(s.u)
        lhs_t.append(float(arc_integral(d4, g4, x0, 0.75 * R)[0]))
        lhs_global_t.append(g4.weight * float(np.sum(d4)))
        sup_local.append(float(arc_integral(d2, g2, x0, R)[0]))
        sup_all.append(float(np.max(arc_integral(d2, g2, s.u.grid.nodes, R))))
        half_local.append(float(arc_integral(h2, gh, x0, R)[0]))
        quarter_global.append(g2.weight * float(np.sum(d2)))
    lhs = _trapezoid(t, np.array(lhs_t))
    rhs = max(sup_local) * (_trapezoid(t, np.array(half_local)) + _trapezoid(t, np.array(quarter_global)) / R**2)
    lhs_g = _trapezoid(t, np.array(lhs_global_t))
    return {"lhs": lhs, "rhs": rhs, "lhs_global": lhs_g, "sup_local": max(sup_local), "sup_all": max(sup_all),
            "half_local": _trapezoid(t, np.array(half_local)), "quarter_global": _trapezoid(t, np.array(quarter_global))}


def local_l4_monitor(trajectory: Trajectory, x0: float, R: float, reference: Trajectory | None = None, stability: float = 0.05) -> RatioReport:
    """Local L⁴ estimate: ∫∫_{B_{3R/4}} |(-Δ)^{1/4}u|⁴ against
    sup_t ∫_{B_R} |(-Δ)^{1/4}u|² · (∫∫_{B_R} |(-Δ)^{1/2}u|² + R⁻²∫∫ |(-Δ)^{1/4}u|²).

    The global variant (whole circle, sup over centers, R⁻³) is reported too.
    With a ``reference`` trajectory (refined in N or dt) the ratio must agree
    within ``stability``.
    """
    if not 0.0 < R < 1.0:
        raise DomainError(f"radius must lie in (0, 1), got {R}")
    rep = RatioReport("local_l4", {"x0": x0, "R": R}, None, tolerance=f"finite; refinement change <= {stability:.0%}",
                      anchor="local L4 estimate for the flow")
    a = _l4_global(trajectory, x0, R)
    rep.lhs, rep.rhs = [a["lhs"]], [a["rhs"]]
    rep.ratios = [a["lhs"] / a["rhs"] if a["rhs"] > 0 else (0.0 if a["lhs"] == 0 else math.inf)]
    rep.finalize()
    rep.extra.update({k: v for k, v in a.items()})
    rep.extra["global_ratio"] = a["lhs_global"] / a["rhs_global"] if a["rhs_global"] > 0 else 0.0
    rep.extra["measured"] = rep.ratios[0]
    finite = all(math.isfinite(r) for r in rep.ratios)
    if reference is not None:
        b = _l4_global(reference, x0, R)
        rb = b["lhs"] / b["rhs"] if b["rhs"] > 0 else 0.0
        change = _relative_change(rep.ratios[0], rb)
        rep.stable = change <= stability
        rep.extra.update({"reference_ratio": rb, "relative_change": change})
    rep.verdict = "pass" if finite and rep.stable is not False else "fail"
    return rep


def _l4_global(traj: Trajectory, x0: float, R: float) -> dict:
    out = _l4_sides(traj, x0, R)
    t = traj.times
    half_global = []
    for s in traj.states:
        h2, gh = _half_density_sq(s.u)
        half_global.append(gh.weight * float(np.sum(h2)))
    out["rhs_global"] = out["sup_all"] * (_trapezoid(t, np.array(half_global)) + out["quarter_global"] / R**3)
    return out


def local_energy_monitor(trajectory: Trajectory, x0: float, R: float, reference: Trajectory | None = None, stability: float = 0.10) -> RatioReport:
    """sup_t (E_R(x0, t) - E_{2R}(x0, 0)) / ((t/R² + √t/R) E(u0)) over stored snapshots t > 0."""
    if not 0.0 < R < 0.5:
        raise DomainError(f"radius must lie in (0, 1/2), got {R}")
    rep = RatioReport("local_energy", {"x0": x0, "R": R}, None, tolerance=f"finite; dt-refinement change <= {stability:.0%}",
                      anchor="local energy inequality for the flow")
    r, info = _local_energy_ratio(trajectory, x0, R)
    rep.lhs = info["numerators"]
    rep.rhs = info["denominators"]
    rep.ratios = info["ratios"]
    rep.finalize()
    rep.max_ratio = r
    rep.extra.update({"first_snapshot_excess": info["first_excess"], "E0": info["E0"], "measured": r})
    finite = math.isfinite(r)
    if reference is not None:
        rb, _ = _local_energy_ratio(reference, x0, R)
        change = _relative_change(r, rb)
        rep.stable = change <= stability
        rep.extra.update({"reference_ratio": rb, "relative_change": change})
    rep.verdict = "pass" if finite and rep.stable is not False else "fail"
    return rep


def _local_energy_ratio(traj: Trajectory, x0: float, R: float):
    s0 = traj.states[0]
    E0 = s0.energy
    e2r0 = float(local_energy_profile(s0.u, 2 * R, np.array([x0]))[0])
    nums, dens, ratios = [], [], []
    for s in traj.states[1:]:
        er = float(local_energy_profile(s.u, R, np.array([x0]))[0])
        den = (s.t / R**2 + math.sqrt(s.t) / R) * E0
        nums.append(er - e2r0)
        dens.append(den)
        ratios.append((er - e2r0) / den if den > 0 else 0.0)
    first_excess = nums[0] if nums else 0.0
    sup = max(ratios) if ratios else 0.0
    return sup, {"numerators": nums, "denominators": dens, "ratios": ratios, "first_excess": first_excess, "E0": E0}


# ---------------------------------------------------------------------------
# Norm equivalence Ẇ^{s,(p,q)} ~ Ḟ^s_{p,q}


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C^∞ step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    f = lambda a: np.where(a > 0, np.exp(-1.0 / np.where(a > 0, a, 1.0)), 0.0)
    return f(t) / (f(t) + f(1.0 - t))


def _psi(xi: np.ndarray) -> np.ndarray:
    """1 on |ξ| <= 1, 0 on |ξ| >= 2, smooth in between."""
    return _smooth_step(2.0 - np.abs(xi))


def lp_partition(k: np.ndarray, jmax: int) -> np.ndarray:
    """Frozen dyadic partition: φ_0 = ψ, φ_j(ξ) = ψ(ξ/2^j) - ψ(ξ/2^{j-1}).

    ψ is the C^∞ step above, so supp φ_0 ⊂ B_2 and supp φ_j ⊂ {2^{j-1} <= |ξ| <= 2^{j+1}};
    the φ_j sum to 1 and 2^{jk}‖D^kφ_j‖_∞ is bounded by the corresponding norm of ψ.
    Returns an array of shape (jmax + 1, len(k)).
    """
    k = np.asarray(k, dtype=float)
    rows = [_psi(k)]
    for j in range(1, jmax + 1):
        rows.append(_psi(k / 2.0**j) - _psi(k / 2.0 ** (j - 1)))
    return np.array(rows)


def triebel_lizorkin_norm(c: SpectralField, s: float, p: float, q: float) -> float:
    """Homogeneous ‖(Σ_j (2^{js}|Δ_j f|)^q)^{1/q}‖_{L^p}, zero mode dropped."""
    grid = c.grid
    k = grid.wavenumbers
    band = max(c.bandwidth(), 1)
    jmax = int(math.ceil(math.log2(band))) + 1
    phi = lp_partition(k, jmax)
    coeffs = np.where(k[None, :] == 0, 0.0, c.coeffs)
    acc = np.zeros(grid.N)
    for j in range(jmax + 1):
        block = coeffs * phi[j][None, :]
        vals = np.fft.ifft(block, axis=-1).real * grid.N
        mag = np.sqrt(np.sum(vals * vals, axis=0))
        acc += (2.0 ** (j * s) * mag) ** q
    G = acc ** (1.0 / q)
    return float((grid.weight * np.sum(G**p)) ** (1.0 / p))


def gagliardo_norm(f: GridField, s: float, p: float, q: float) -> float:
    """‖𝒟_{s,q} f‖_{L^p}, 𝒟_{s,q}f(x) = (∫ |f(x) - f(y)|^q / |x - y|^{1+sq} dy)^{1/q}.

    The diagonal cell is omitted, except when q(1 - s) = 1 where the integrand
    has the finite limit |f'(x)|^q, which is used instead.
    """
    from .fractional_calculus import distance_power

    grid = f.grid
    v = f.values
    diff = np.sqrt(np.sum(np.abs(v[:, :, None] - v[:, None, :]) ** 2, axis=0))
    dq = grid.weight * np.sum(diff**q * distance_power(grid.N, 1.0 + s * q), axis=-1)
    if abs(q * (1.0 - s) - 1.0) < 1e-12:
        from .spectral_core import riesz_gradient

        du = synthesize(riesz_gradient(analyze(f))).values
        dq = dq + grid.weight * np.sqrt(np.sum(np.abs(du) ** 2, axis=0)) ** q
    D = dq ** (1.0 / q)
    return float((grid.weight * np.sum(D**p)) ** (1.0 / p))


def norm_equivalence_report(
    family: SampleFamily,
    s: float = 0.5,
    p: float = 4.0,
    q: float = 2.0,
    resolutions: tuple[int, int] = (256, 512),
    spread_limit: float = 30.0,
    stability: float = 0.05,
) -> RatioReport:
    """Two-sided ratios ‖f‖_{Ẇ^{s,(p,q)}} / ‖f‖_{Ḟ^s_{p,q}} over a family."""
    if not p > q / (1.0 + s * q):
        raise CheckRefused(f"norm equivalence needs p > q/(1+sq) = {q / (1 + s * q):.4g}; got p = {p}")
    rep = RatioReport("norm_equivalence", {"s": s, "p": p, "q": q, "resolutions": list(resolutions), **asdict(family)}, family.seed,
                      tolerance=f"two-sided spread <= {spread_limit:g}x, stable within {stability:.0%} under N-doubling",
                      anchor="Gagliardo / Triebel-Lizorkin norm equivalence")
    by_N = {}
    for N in resolutions:
        grid = CircleGrid(N)
        rows = []
        for c in family.spectral(grid):
            if c.with_coeffs(np.where(grid.wavenumbers[None, :] == 0, 0.0, c.coeffs)).bandwidth() == 0:
                continue
            rows.append((gagliardo_norm(synthesize(c), s, p, q), triebel_lizorkin_norm(c, s, p, q)))
        by_N[N] = rows
    fine = by_N[resolutions[-1]]
    for w, f in fine:
        rep.lhs.append(w)
        rep.rhs.append(f)
        rep.ratios.append(w / f)
    rep.finalize()
    lo, hi = min(rep.ratios), max(rep.ratios)
    spread = hi / lo
    coarse = [w / f for w, f in by_N[resolutions[0]]]
    change = max(_relative_change(max(coarse), hi), _relative_change(min(coarse), lo))
    rep.stable = change <= stability
    rep.extra.update({"min_ratio": lo, "max_ratio": hi, "spread": spread, "relative_change": change, "measured": spread})
    rep.verdict = "pass" if spread <= spread_limit and rep.stable and all(map(math.isfinite, rep.ratios)) else "fail"
    return rep
