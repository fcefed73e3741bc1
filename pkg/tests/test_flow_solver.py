import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import random_sphere
from halflow import constants
from halflow.errors import ConfigurationError, IntegrationFailure
from halflow.flow_solver import (
    DIAGNOSTIC_COLUMNS,
    FlowConfig,
    FlowState,
    epsilon_of_R,
    harmonic_residual,
    initial_data,
    linearized_step,
    local_energy,
    local_energy_profile,
    long_time_harness,
    nonlinearity,
    orthogonality_residual,
    random_band_field,
    run,
    step,
    twin_run,
)
from halflow.fractional_calculus import lambda_raw
from halflow.spectral_core import (
    CircleGrid,
    GridField,
    SphereField,
    analyze,
    fractional_laplacian,
    half_energy,
    heat_propagate,
    identity_map,
    synthesize,
)

SMALL = {"family": "perturbed_constant", "params": {"eps": 0.3, "band": 8}}


def constant_map(grid, n=3):
    v = np.zeros((n, grid.N))
    v[-1] = 1.0
    return SphereField(v, grid)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        FlowConfig(N=100)
    with pytest.raises(ConfigurationError):
        FlowConfig(N=64, dt=0.0)
    with pytest.raises(ConfigurationError):
        FlowConfig(N=64, scheme="rk4")
    with pytest.raises(ConfigurationError):
        FlowConfig(N=64, dt=0.1, T=0.05)
    assert FlowConfig(N=64, dt=0.01, T=1.0).steps == 100


def test_initial_data_families():
    g = CircleGrid(64)
    assert half_energy(initial_data(g, 3, "constant")) == 0.0
    assert np.array_equal(initial_data(g, 2, "degree", {"q": 1}).values, identity_map(g).values)
    a = initial_data(g, 3, "perturbed_constant", {"eps": 0.2}, seed=4)
    b = initial_data(g, 3, "perturbed_constant", {"eps": 0.2}, seed=4)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(ConfigurationError):
        initial_data(g, 3, "perturbed_constant", {"eps": 0.2})
    with pytest.raises(ConfigurationError):
        initial_data(g, 3, "spiral")
    assert isinstance(initial_data(g, 2, "mollified_jump", {"eps": 0.3}), SphereField)


def test_random_band_field_is_band_limited():
    g = CircleGrid(64)
    f = random_band_field(g, 2, 5, 0)
    c = analyze(f)
    assert c.bandwidth(1e-12) == 5 and abs(c.coefficient(0)) < 1e-15
    assert f.sup_norm() == pytest.approx(1.0)


def test_nonlinearity_examples(grid256):
    assert not np.any(nonlinearity(constant_map(grid256)).values)
    u = identity_map(grid256)
    assert np.max(np.abs(nonlinearity(u).values - u.values)) < 1e-12
    # embedding S¹ ⊂ S² leaves λ unchanged
    lifted = SphereField(np.vstack([u.values, np.zeros(256)]), grid256)
    assert np.max(np.abs(lambda_raw(lifted).values - lambda_raw(u).values)) < 1e-13


@pytest.mark.parametrize("scheme", ["exponential", "semi-implicit"])
def test_identity_is_a_fixed_point(scheme):
    state = FlowState.start(identity_map(CircleGrid(128), 1, 3))
    for _ in range(50):
        new = step(state, 0.05, scheme)
        assert np.max(np.abs(new.u.values - state.u.values)) <= 1e-10
        state = new


def test_heat_only_step_matches_semigroup():
    g = CircleGrid(128)
    u = random_sphere(g, seed=1)
    out = step(FlowState.start(u), 0.03, "exponential", project=False, nonlinear=False)
    ref = synthesize(heat_propagate(analyze(u), 0.03))
    assert np.max(np.abs(out.u.values - ref.values)) < 1e-14


@pytest.mark.parametrize("scheme", ["exponential", "semi-implicit"])
def test_self_convergence_first_order(scheme):
    g = CircleGrid(128)
    u0 = initial_data(g, 3, "perturbed_constant", {"eps": 0.3, "band": 8}, 1)

    def final(dt):
        s = FlowState.start(u0)
        for _ in range(int(round(1.0 / dt))):
            s = step(s, dt, scheme)
        return s.u.values

    dts = (0.02, 0.01, 0.005)
    ref = final(dts[-1] / 8)
    errs = [math.sqrt(g.weight * np.sum((final(d) - ref) ** 2)) for d in dts]
    for a, b in zip(errs, errs[1:]):
        assert 1.6 <= a / b <= 2.4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_values_raise():
    g = CircleGrid(64)
    state = FlowState.start(random_sphere(g, seed=0))
    with pytest.raises(IntegrationFailure) as info:
        for _ in range(200):
            state = step(state, 1.0, "explicit-reference", project=False)
    assert info.value.state is not None


def test_run_small_energy_decays_to_constant():
    traj = run(FlowConfig(N=128, dt=0.02, T=20.0, seed=1, initial=SMALL))
    assert not traj.halted
    e = np.array(traj.energies)
    assert np.all(np.diff(e) <= 1e-12)
    assert e[-1] <= 1e-6


def test_run_identity_diagnostics_constant():
    traj = run(FlowConfig(N=128, dt=0.01, T=0.5, cadence=5, initial={"family": "degree", "params": {"q": 1}}))
    rows = np.array([r.row() for r in traj.records])
    assert list(DIAGNOSTIC_COLUMNS)[0] == "t"
    for j, name in enumerate(DIAGNOSTIC_COLUMNS[1:], start=1):
        col = rows[1:, j]
        assert np.max(np.abs(col - col[0])) <= 1e-10, name
    assert rows[0, 1] == pytest.approx(math.pi)


def test_dissipation_defect_converges():
    defects = []
    for dt in (0.02, 0.01, 0.005):
        traj = run(FlowConfig(N=64, dt=dt, T=1.0, seed=2, initial=SMALL))
        defects.append(abs(traj.energies[-1] - traj.energies[0] + dt * sum(traj.dissipation)))
    for a, b in zip(defects, defects[1:]):
        assert a / b >= 1.6


def test_run_halts_on_energy_increase():
    traj = run(FlowConfig(N=64, dt=0.5, T=5.0, seed=0, scheme="explicit-reference", initial=SMALL))
    assert traj.halted and traj.events[0].startswith("energy_increase")
    assert traj.states[-1] is traj.final


def test_run_halts_on_sphere_drift():
    traj = run(FlowConfig(N=64, dt=0.01, T=1.0, seed=0, project=False, drift_limit=1e-9, initial=SMALL))
    assert traj.halted and traj.events[0].startswith("sphere_drift")


def test_snapshot_cadence():
    traj = run(FlowConfig(N=32, dt=0.1, T=1.0, seed=0, snapshot_cadence=2, initial=SMALL))
    assert np.allclose(traj.times, [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])


def test_orthogonality_residual_examples(grid256):
    u = identity_map(grid256)
    zero = GridField(np.zeros_like(u.values), grid256)
    r = orthogonality_residual(FlowState.start(u), zero)
    assert r.tangential <= 1e-8 and r.full <= 1e-8
    c = constant_map(grid256)
    r = orthogonality_residual(FlowState.start(c), GridField(np.zeros((3, 256)), grid256))
    assert float(r) == 0.0 and r.normal == 0.0


def test_orthogonality_residual_of_the_flow_field():
    g = CircleGrid(512)
    u = random_sphere(g, seed=4)
    state = FlowState.start(u)
    half = synthesize(fractional_laplacian(analyze(u), 0.5)).values
    u_t = GridField(-half + u.values * state.lam_raw.values / constants.LAMBDA_SCALE, g)
    r = orthogonality_residual(state, u_t)
    scale = np.max(np.abs(half))
    assert r.tangential <= 1e-12 * scale
    assert r.normal <= 1e-8 * scale


def test_harmonic_residual():
    g = CircleGrid(128)
    assert harmonic_residual(identity_map(g)) < 1e-12
    assert harmonic_residual(identity_map(g, 3, 3)) < 1e-11
    assert harmonic_residual(random_sphere(g, seed=0)) > 1e-3


def test_local_energy_examples():
    g = CircleGrid(256)
    assert np.all(local_energy_profile(constant_map(g), 0.3) == 0)
    assert local_energy(identity_map(g), 1.0, math.pi / 2) == pytest.approx(math.pi / 2, abs=1e-3)
    # covering family: arcs of radius R centered every R overlap, so they sum to at least E
    u = random_sphere(g, seed=6)
    R = 2 * math.pi / 16
    centers = np.arange(16) * R
    assert np.sum(local_energy_profile(u, R, centers)) >= half_energy(u) * (1 - 1e-12)
    assert local_energy(u, 0.0, math.pi) == pytest.approx(half_energy(u), rel=1e-12)


def test_local_energy_against_arc_quadrature():
    g = CircleGrid(64)
    u = random_sphere(g, n=2, band=6, seed=2)
    c = fractional_laplacian(analyze(u), 0.25)
    k = g.wavenumbers

    def density(x):
        w = (c.coeffs * np.exp(1j * k * x)).sum(axis=1).real
        return float(np.sum(w * w))

    for x0, R in [(0.3, 0.2), (2.0, 1.1), (5.9, 0.45)]:
        oracle = 0.5 * quad(density, x0 - R, x0 + R, limit=200)[0]
        assert local_energy(u, x0, R) == pytest.approx(oracle, rel=1e-9)


def test_epsilon_of_R():
    traj = run(FlowConfig(N=64, dt=0.02, T=0.2, seed=0, initial=SMALL))
    e = epsilon_of_R(traj, 0.5)
    assert 0 < e <= traj.states[0].energy + 1e-12
    assert e == pytest.approx(max(np.max(local_energy_profile(s.u, 0.5)) for s in traj.states))


def test_twin_identical_schemes():
    u0 = initial_data(CircleGrid(64), 3, "perturbed_constant", {"eps": 0.3}, 0)
    rep = twin_run(u0, "exponential", "exponential", (0.05, 0.025), T=0.5)
    assert rep.divergence == [0.0, 0.0]


def test_twin_perturbation_stability():
    g = CircleGrid(64)
    a = initial_data(g, 3, "perturbed_constant", {"eps": 0.3, "band": 8}, 1)
    p = np.random.default_rng(0).standard_normal(a.values.shape)
    p *= 1e-6 / GridField(p, g).l2_norm()
    b = SphereField.project(a.values + p, g)
    sa, sb = FlowState.start(a), FlowState.start(b)
    for _ in range(500):
        sa, sb = step(sa, 0.01), step(sb, 0.01)
    assert GridField(sa.u.values - sb.u.values, g).l2_norm() <= 1e-4


def test_linearized_step_examples():
    g = CircleGrid(64)
    u = random_sphere(g, seed=3)
    zero = GridField(np.zeros((3, 64)), g)
    assert not np.any(linearized_step(u, zero, 0.01).values)
    c = constant_map(g)
    h = random_band_field(g, 3, 6, 0)
    out = linearized_step(c, h, 0.05)
    ref = synthesize(heat_propagate(analyze(h), 0.05))
    assert np.max(np.abs(out.values - ref.values)) < 1e-14


@pytest.mark.parametrize("which", ["identity", "random"])
def test_linearized_growth_bound(which):
    g = CircleGrid(128)
    u = identity_map(g, 1, 3) if which == "identity" else random_sphere(g, seed=8)
    lam = lambda_raw(u)
    C = float(np.max(lam.values)) / constants.LAMBDA_SCALE + 1.0
    dt = 0.01
    for seed in range(20):
        h = random_band_field(g, 3, 8, seed)
        h0 = h.sup_norm()
        for i in range(100):
            h = linearized_step(u, h, dt, lam)
            assert h.sup_norm() <= math.exp(C * (i + 1) * dt) * h0


def test_long_time_harness_verdicts():
    cfg = FlowConfig(N=32, dt=0.05, T=3.0, initial={"family": "constant"})
    rep = long_time_harness(cfg)
    assert rep.verdict == "pass"
    assert max(rep.h_half) == 0 and max(rep.harmonic) == 0 and max(rep.energy) == 0
    big = FlowConfig(N=32, dt=0.05, T=3.0, initial={"family": "degree", "params": {"q": 1}})
    assert long_time_harness(big).verdict == "refused"
    short = FlowConfig(N=32, dt=0.05, T=1.0, seed=0, initial=SMALL)
    assert long_time_harness(short).verdict == "inconclusive"


def test_long_time_dissipation_tail_decreases():
    rep = long_time_harness(FlowConfig(N=64, dt=0.02, T=10.0, seed=3, initial=SMALL))
    tails = np.array(rep.dissipation_tail)
    assert tails[-1] < 1e-3 * tails[0]
    assert np.all(np.diff(tails) <= 1e-15)
