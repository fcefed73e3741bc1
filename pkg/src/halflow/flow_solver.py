"""Time integration of the half-harmonic gradient flow u_t + (-Δ)^{1/2}u = u λ.

λ = λ_raw / LAMBDA_SCALE with λ_raw(x) = ∫ |u(x) - u(y)|² / |x - y|² dy. The
linear part is treated with the exact propagator e^{-|k| dt} (or its
semi-implicit Padé analogue), the nonlinearity explicitly, and an optional
pointwise projection u ↦ u/|u| keeps the values on the sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import constants
from .errors import ConfigurationError, DomainError, IntegrationFailure
from .fractional_calculus import gradient_product, lambda_raw
from .spectral_core import (
    CircleGrid,
    GridField,
    SpectralField,
    SphereField,
    analyze,
    fractional_laplacian,
    half_energy,
    identity_map,
    sobolev_norm,
    synthesize,
)

__all__ = [
    "SCHEMES",
    "FlowConfig",
    "FlowState",
    "DiagnosticsRecord",
    "Trajectory",
    "OrthogonalityResidual",
    "TwinReport",
    "LongTimeReport",
    "initial_data",
    "random_band_field",
    "nonlinearity",
    "step",
    "run",
    "orthogonality_residual",
    "harmonic_residual",
    "local_energy",
    "local_energy_profile",
    "epsilon_of_R",
    "twin_run",
    "linearized_step",
    "long_time_harness",
    "DIAGNOSTIC_COLUMNS",
]

SCHEMES = ("exponential", "semi-implicit", "explicit-reference")
DIAGNOSTIC_COLUMNS = ("t", "energy", "dissipation", "sphere_drift", "orth_residual", "harmonic_residual", "eps_R")


def random_band_field(grid: CircleGrid, n: int, band: int, seed: int, decay: float = 1.0) -> GridField:
    """Real random trigonometric polynomial of degree ``band``, unit sup-norm.

    Mode k gets independent complex normal amplitudes scaled by k^{-decay};
    the zero mode is left out.
    """
    if band > grid.K:
        raise ConfigurationError(f"band {band} does not fit a grid of size {grid.N}")
    rng = np.random.default_rng(seed)
    c = np.zeros((n, grid.N), dtype=complex)
    k = np.arange(1, band + 1)
    amp = (rng.standard_normal((n, band)) + 1j * rng.standard_normal((n, band))) * k ** (-decay)
    c[:, 1 : band + 1] = amp
    c[:, grid.N - band :] = np.conj(amp[:, ::-1])
    v = synthesize(SpectralField(c, grid)).values
    return GridField(v / np.max(np.sqrt(np.sum(v * v, axis=0))), grid)


def initial_data(grid: CircleGrid, n: int, family: str, params: dict | None = None, seed: int | None = None) -> SphereField:
    """Named initial-data families.

    ``perturbed_constant``: π(p + eps·noise) with p the last basis vector and
    noise a seeded band-limited field (params ``eps``, ``band``).
    ``degree``: (cos qx, sin qx, 0, ...) (param ``q``; q = 1 is the identity map).
    ``constant``: the last basis vector.
    ``mollified_jump``: mollify-and-project of a two-valued map (params ``eps``,
    ``angle``), see ``inequality_lab.mollify_project``.
    """
    params = dict(params or {})
    if family == "constant":
        v = np.zeros((n, grid.N))
        v[-1] = 1.0
        return SphereField(v, grid)
    if family == "degree":
        return identity_map(grid, int(params.get("q", 1)), n)
    if family == "perturbed_constant":
        if seed is None:
            raise ConfigurationError("perturbed_constant data needs a seed")
        noise = random_band_field(grid, n, int(params.get("band", 8)), seed)
        p = np.zeros((n, 1))
        p[-1] = 1.0
        return SphereField.project(p + float(params.get("eps", 0.1)) * noise.values, grid)
    if family == "mollified_jump":
        from .inequality_lab import jump_map, mollify_project

        return mollify_project(jump_map(grid, float(params.get("angle", math.pi / 2)), n), float(params.get("eps", 0.25)))
    raise ConfigurationError(f"unknown initial-data family {family!r}")


@dataclass(frozen=True)
class FlowConfig:
    N: int
    n: int = 3
    dt: float = 1e-2
    T: float = 1.0
    scheme: str = "exponential"
    project: bool = True
    initial: dict = field(default_factory=lambda: {"family": "perturbed_constant", "params": {"eps": 0.2, "band": 8}})
    seed: int | None = 0
    cadence: int = 10
    snapshot_cadence: int = 0
    local_R: float = 0.25
    energy_tol: float = 1e-8
    drift_limit: float = 1e-3
    small_energy: float = 0.5

    def __post_init__(self):
        CircleGrid(self.N)
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.T >= self.dt:
            raise ConfigurationError(f"horizon T = {self.T} is shorter than dt = {self.dt}")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.n < 2:
            raise ConfigurationError("flow needs at least two components")
        if self.cadence < 1:
            raise ConfigurationError("cadence must be at least 1")

    @property
    def grid(self) -> CircleGrid:
        return CircleGrid(self.N)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def initial_state(self) -> "FlowState":
        init = dict(self.initial)
        u0 = initial_data(self.grid, self.n, init.get("family", "perturbed_constant"), init.get("params"), self.seed)
        return FlowState.start(u0)


@dataclass(frozen=True)
class FlowState:
    """Time stamp, field and cached λ_raw and energy."""

    t: float
    u: GridField
    lam_raw: GridField
    energy: float

    @classmethod
    def start(cls, u: GridField, t: float = 0.0) -> "FlowState":
        return cls(t, u, lambda_raw(u), half_energy(u))


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    energy: float
    dissipation: float
    sphere_drift: float
    orth_residual: float
    harmonic_residual: float
    eps_R: float

    def row(self) -> list[float]:
        return [getattr(self, c) for c in DIAGNOSTIC_COLUMNS]


@dataclass
class Trajectory:
    """Snapshots, diagnostics and labelled events of one run."""

    config: FlowConfig | None
    states: list[FlowState] = field(default_factory=list)
    records: list[DiagnosticsRecord] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    dissipation: list[float] = field(default_factory=list)
    final: FlowState | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def halted(self) -> bool:
        return bool(self.events)


def nonlinearity(u: GridField, lam_raw_field: GridField | None = None) -> GridField:
    """u(x) λ(x) with λ = λ_raw / LAMBDA_SCALE."""
    lam = lambda_raw(u) if lam_raw_field is None else lam_raw_field
    return GridField(u.values * (lam.values / constants.LAMBDA_SCALE), u.grid)


def _linear_factors(grid: CircleGrid, dt: float, scheme: str) -> tuple[np.ndarray, np.ndarray]:
    """(a, b) with û_new = a·û + b·N̂ for each scheme."""
    k = np.abs(grid.wavenumbers).astype(float)
    if scheme == "exponential":
        a = np.exp(-k * dt)
        return a, dt * a
    if scheme == "semi-implicit":
        a = 1.0 / (1.0 + k * dt)
        return a, dt * a
    if scheme == "explicit-reference":
        return 1.0 - k * dt, np.full_like(k, dt)
    raise ConfigurationError(f"unknown scheme {scheme!r}")


def step(
    state: FlowState,
    dt: float,
    scheme: str = "exponential",
    project: bool = True,
    nonlinear: bool = True,
) -> FlowState:
    """Advance one step; ``nonlinear=False`` gives the pure fractional heat flow."""
    u = state.u
    a, b = _linear_factors(u.grid, dt, scheme)
    uhat = analyze(u).coeffs
    new = uhat * a[None, :]
    if nonlinear:
        new = new + analyze(nonlinearity(u, state.lam_raw)).coeffs * b[None, :]
    values = synthesize(SpectralField(new, u.grid)).values
    if not np.all(np.isfinite(values)):
        raise IntegrationFailure(f"non-finite values at t = {state.t + dt:.6g}", state)
    if project:
        try:
            field_new = SphereField.project(values, u.grid)
        except DomainError as exc:
            raise IntegrationFailure(f"projection failed at t = {state.t + dt:.6g}: {exc}", state) from exc
    else:
        field_new = GridField(values, u.grid)
    return FlowState.start(field_new, state.t + dt)


def _half_laplacian_values(u: GridField) -> np.ndarray:
    return synthesize(fractional_laplacian(analyze(u), 0.5)).values


@dataclass(frozen=True)
class OrthogonalityResidual:
    """L² residuals of the two equivalent forms of the flow equation.

    ``tangential``: dπ(u)(u_t + (-Δ)^{1/2}u); ``normal``: u·u_t, which vanishes
    for sphere-valued motion; ``full``: u_t + (-Δ)^{1/2}u - uλ.
    """

    tangential: float
    normal: float
    full: float

    def __float__(self) -> float:
        return self.tangential


def orthogonality_residual(state: FlowState, u_t: GridField) -> OrthogonalityResidual:
    u = state.u.values
    w = u_t.values + _half_laplacian_values(state.u)
    tangential = w - np.sum(u * w, axis=0) * u
    normal = np.sum(u * u_t.values, axis=0)
    full = w - u * (state.lam_raw.values / constants.LAMBDA_SCALE)
    weight = state.u.grid.weight
    norm = lambda a: float(np.sqrt(weight * np.sum(a * a)))
    return OrthogonalityResidual(norm(tangential), norm(normal), norm(full))


def harmonic_residual(u: GridField) -> float:
    """‖u ∧ (-Δ)^{1/2}u‖_{L²}, summing the squared wedge entries over i < k."""
    v = u.values
    lv = _half_laplacian_values(u)
    total = 0.0
    for i in range(u.n):
        for k in range(i + 1, u.n):
            w = v[i] * lv[k] - v[k] * lv[i]
            total += float(np.sum(w * w))
    return math.sqrt(u.grid.weight * total)


def _energy_density_coeffs(u: GridField) -> tuple[np.ndarray, CircleGrid]:
    """Coefficients of |(-Δ)^{1/4}u|², exact on a grid twice as fine."""
    fine = CircleGrid(2 * u.grid.N)
    c = fractional_laplacian(analyze(u), 0.25)
    vals = synthesize(SpectralField(c.coeffs, u.grid), fine).values
    dens = np.sum(vals * vals, axis=0)
    return np.fft.fft(dens) / fine.N, fine


def local_energy_profile(u: GridField, R: float, centers: np.ndarray | None = None) -> np.ndarray:
    """E_R(u; x) = ½∫_{B_R(x)} |(-Δ)^{1/4}u|² at each center (default: the grid nodes).

    The density is a trigonometric polynomial, integrated over the arc
    exactly: mode k contributes ŵ(k) e^{ikx} 2 sin(kR)/k.
    """
    if not 0.0 < R <= math.pi:
        raise DomainError(f"arc radius must lie in (0, π], got {R}")
    what, fine = _energy_density_coeffs(u)
    k = fine.wavenumbers.astype(float)
    arc = np.where(k == 0, 2.0 * R, 2.0 * np.sin(k * R) / np.where(k == 0, 1.0, k))
    if centers is None:
        prof = np.fft.ifft(what * arc).real * fine.N
        return 0.5 * prof[::2]
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    phases = np.exp(1j * np.outer(centers, k))
    return 0.5 * (phases @ (what * arc)).real


def local_energy(u: GridField, x0: float, R: float) -> float:
    return float(local_energy_profile(u, R, np.array([x0]))[0])


def epsilon_of_R(trajectory: Trajectory, R: float) -> float:
    """ε(R) = sup over stored snapshots and grid centers of E_R."""
    return float(max(np.max(local_energy_profile(s.u, R)) for s in trajectory.states))


def _diagnostics(state: FlowState, u_t: GridField, R: float) -> DiagnosticsRecord:
    u = state.u
    drift = float(np.max(np.abs(np.sqrt(np.sum(u.values**2, axis=0)) - 1.0)))
    return DiagnosticsRecord(
        t=state.t,
        energy=state.energy,
        dissipation=u_t.l2_norm() ** 2,
        sphere_drift=drift,
        orth_residual=float(orthogonality_residual(state, u_t)),
        harmonic_residual=harmonic_residual(u),
        eps_R=float(np.max(local_energy_profile(u, R))),
    )


def run(
    config: FlowConfig,
    initial: FlowState | None = None,
    observer: Callable[[FlowState, FlowState], None] | None = None,
) -> Trajectory:
    """Integrate to the horizon, collecting diagnostics at ``config.cadence``.

    Halts with a labelled event on an energy increase above ``energy_tol`` or
    (projection off) sphere drift above ``drift_limit``. Non-finite values
    raise ``IntegrationFailure``. ``observer(previous, current)`` sees every step.
    """
    state = config.initial_state() if initial is None else initial
    traj = Trajectory(config)
    zero = GridField(np.zeros_like(state.u.values), state.u.grid)
    traj.states.append(state)
    traj.records.append(_diagnostics(state, zero, config.local_R))
    traj.energies.append(state.energy)
    snap = config.snapshot_cadence
    for i in range(1, config.steps + 1):
        new = step(state, config.dt, config.scheme, config.project)
        u_t = GridField((new.u.values - state.u.values) / config.dt, new.u.grid)
        traj.energies.append(new.energy)
        traj.dissipation.append(u_t.l2_norm() ** 2)
        if observer is not None:
            observer(state, new)
        event = None
        if new.energy > state.energy + config.energy_tol:
            event = f"energy_increase at t={new.t:.6g}: {state.energy:.12g} -> {new.energy:.12g}"
        if not config.project:
            drift = float(np.max(np.abs(np.sqrt(np.sum(new.u.values**2, axis=0)) - 1.0)))
            if drift > config.drift_limit:
                event = f"sphere_drift at t={new.t:.6g}: {drift:.3e}"
        state = new
        if i % config.cadence == 0 or i == config.steps or event:
            traj.records.append(_diagnostics(state, u_t, config.local_R))
        if (snap and i % snap == 0) or i == config.steps or event:
            if traj.states[-1] is not state:
                traj.states.append(state)
        if event:
            traj.events.append(event)
            break
    traj.final = state
    return traj


@dataclass
class TwinReport:
    dts: list[float]
    divergence: list[float]
    ratios: list[float]
    events: list[str]
    passed: bool
    band: tuple[float, float] = (1.6, 2.4)


def _sup_l2_gap(ua: FlowState, ub: FlowState, dt: float, steps: int, scheme_a: str, scheme_b: str, project: bool) -> tuple[float, list[str]]:
    sup = 0.0
    events: list[str] = []
    for _ in range(steps):
        try:
            ua = step(ua, dt, scheme_a, project)
            ub = step(ub, dt, scheme_b, project)
        except IntegrationFailure as exc:
            events.append(str(exc))
            break
        gap = GridField(ua.u.values - ub.u.values, ua.u.grid).l2_norm()
        sup = max(sup, gap)
    return sup, events


def twin_run(
    u0: GridField,
    scheme_a: str = "exponential",
    scheme_b: str = "semi-implicit",
    dt_list=(2.0**-6, 2.0**-7, 2.0**-8, 2.0**-9, 2.0**-10),
    T: float = 5.0,
    project: bool = True,
    u0_b: GridField | None = None,
    band: tuple[float, float] = (1.6, 2.4),
) -> TwinReport:
    """sup_t ‖u_a(t) - u_b(t)‖_{L²} per dt, started from u0 (and optionally u0_b).

    Passes when every ratio of successive divergences lies in ``band``
    (first order in dt).
    """
    start_a = FlowState.start(u0)
    start_b = start_a if u0_b is None else FlowState.start(u0_b)
    divs, events = [], []
    for dt in dt_list:
        steps = int(round(T / dt))
        sup, ev = _sup_l2_gap(start_a, start_b, dt, steps, scheme_a, scheme_b, project)
        divs.append(sup)
        events.extend(ev)
    ratios = [divs[i] / divs[i + 1] if divs[i + 1] > 0 else math.inf for i in range(len(divs) - 1)]
    passed = not events and all(band[0] <= r <= band[1] for r in ratios)
    return TwinReport(list(dt_list), divs, ratios, events, passed, band)


def linearized_step(u: GridField, h: GridField, dt: float, lam_raw_field: GridField | None = None) -> GridField:
    """One exponential step of h_t = -(-Δ)^{1/2}h + hλ + (2/LAMBDA_SCALE) u (d_{1/2}u·d_{1/2}h).

    ``u`` is frozen; the factor 2/LAMBDA_SCALE = 1/π is the derivative of
    λ_raw/LAMBDA_SCALE in the direction h.
    """
    lam = lambda_raw(u) if lam_raw_field is None else lam_raw_field
    cross = gradient_product(u, h).values
    rhs = h.values * (lam.values / constants.LAMBDA_SCALE) + u.values * (2.0 * cross / constants.LAMBDA_SCALE)
    a, b = _linear_factors(u.grid, dt, "exponential")
    new = analyze(h).coeffs * a[None, :] + analyze(GridField(rhs, u.grid)).coeffs * b[None, :]
    return synthesize(SpectralField(new, u.grid))


@dataclass
class LongTimeReport:
    times: list[float]
    h_half: list[float]
    harmonic: list[float]
    dissipation_tail: list[float]
    energy: list[float]
    verdict: str
    notes: list[str]
    targets: dict


def long_time_harness(
    config: FlowConfig,
    sample_every: float = 1.0,
    energy_target: float = 1e-6,
    harmonic_target: float = 1e-4,
    h_half_target: float = 1e-3,
) -> LongTimeReport:
    """Track ‖u - mean u‖_{H^{1/2}}, ‖u ∧ (-Δ)^{1/2}u‖ and ∫_t^{t+1}‖u_t‖² along a run.

    Verdict ``pass`` when all targets are met at the horizon, ``inconclusive``
    when the horizon is too short for two tail windows or the indicators are
    still decreasing without having reached the targets, ``refused`` when the
    initial energy exceeds ``config.small_energy``, ``fail`` otherwise.
    """
    targets = {"energy": energy_target, "harmonic": harmonic_target, "h_half": h_half_target}
    state = config.initial_state()
    notes: list[str] = []
    if state.energy > config.small_energy:
        return LongTimeReport([], [], [], [], [state.energy], "refused", [f"initial energy {state.energy:.4g} exceeds {config.small_energy}"], targets)
    every = max(1, int(round(sample_every / config.dt)))
    times, hh, harm, tails, energy = [], [], [], [], []
    window = 0.0

    def sample(s: FlowState):
        c = analyze(s.u)
        centered = c.with_coeffs(np.where(c.grid.wavenumbers[None, :] == 0, 0.0, c.coeffs))
        times.append(s.t)
        hh.append(sobolev_norm(centered, 0.5))
        harm.append(harmonic_residual(s.u))
        energy.append(s.energy)

    sample(state)
    for i in range(1, config.steps + 1):
        new = step(state, config.dt, config.scheme, config.project)
        u_t = (new.u.values - state.u.values) / config.dt
        window += config.dt * config.grid.weight * float(np.sum(u_t * u_t))
        if new.energy > state.energy + config.energy_tol:
            notes.append(f"energy increase at t={new.t:.6g}")
        state = new
        if i % every == 0:
            sample(state)
            tails.append(window)
            window = 0.0
    if config.T < 2.0 * sample_every or len(tails) < 2:
        verdict = "inconclusive"
        notes.append("horizon too short for two dissipation windows")
    elif energy[-1] <= energy_target and harm[-1] <= harmonic_target and hh[-1] <= h_half_target:
        verdict = "pass"
    elif tails[-1] <= tails[0] and harm[-1] <= harm[0]:
        verdict = "inconclusive"
        notes.append("indicators decreasing but targets not reached by the horizon")
    else:
        verdict = "fail"
    return LongTimeReport(times, hh, harm, tails, energy, verdict, notes, targets)
