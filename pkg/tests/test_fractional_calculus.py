import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_spectral, random_sphere
from halflow.errors import ConfigurationError, DomainError
from halflow.fractional_calculus import (
    CjkTable,
    OffDiagonalKernel,
    build_table,
    circle_distance,
    cjk,
    divergence_symbol,
    divfree_correction,
    frac_divergence,
    frac_gradient_kernel,
    gradient_product,
    lambda_raw,
    od_norm,
    omega_potential,
    pair,
    product_spectrum,
    t_functional,
)
from halflow.spectral_core import (
    CircleGrid,
    GridField,
    SphereField,
    analyze,
    fractional_laplacian,
    from_modes,
    half_energy,
    identity_map,
    synthesize,
)


def closed_form_cjk(j, k):
    """C(j, k) = 2π min(|j|, |k|) for jk < 0, else 0 (expand the product and integrate Fejér kernels)."""
    return 2 * math.pi * min(abs(j), abs(k)) if j * k < 0 else 0.0


def test_circle_distance_examples():
    assert circle_distance(1.3, 1.3) == 0.0
    assert circle_distance(0.2, 0.2 + math.pi) == pytest.approx(2.0)
    assert circle_distance(0.0, math.pi / 2) == pytest.approx(math.sqrt(2))
    assert circle_distance(0.1, 2 * math.pi - 0.1) == pytest.approx(circle_distance(0.0, 0.2))


def test_gradient_kernel_constant_is_zero(grid256):
    f = GridField(np.full((2, 256), 0.7), grid256)
    assert not np.any(frac_gradient_kernel(f, 0.5).values)
    with pytest.raises(DomainError):
        frac_gradient_kernel(f, 1.0)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.25, 0.5, 0.9]))
@settings(max_examples=20, deadline=None)
def test_gradient_kernel_antisymmetric_and_leibniz(seed, s):
    g = CircleGrid(64)
    f = synthesize(random_spectral(g, 1, 10, seed))
    h = synthesize(random_spectral(g, 1, 10, seed + 1))
    df = frac_gradient_kernel(f, s).values
    assert np.array_equal(df, -np.swapaxes(df, -1, -2))
    dh = frac_gradient_kernel(h, s).values
    dfh = frac_gradient_kernel(GridField(f.values * h.values, g), s).values
    leibniz = df * h.values[:, :, None] + f.values[:, None, :] * dh
    assert np.max(np.abs(dfh - leibniz)) <= 1e-12 * np.max(np.abs(dfh))


def test_pair_identity_map():
    assert not np.any(pair(OffDiagonalKernel(np.zeros((2, 64, 64)), CircleGrid(64), 0.5),
                           frac_gradient_kernel(identity_map(CircleGrid(64)), 0.5)).values)
    errs = []
    for N in (128, 256, 512):
        d = frac_gradient_kernel(identity_map(CircleGrid(N)), 0.5)
        errs.append(np.max(np.abs(pair(d, d).values - 2 * np.pi)))
    assert errs[-1] <= 2e-2
    assert errs[0] > errs[1] > errs[2]
    d = frac_gradient_kernel(identity_map(CircleGrid(256)), 0.5, "limit")
    assert np.max(np.abs(pair(d, d, "limit").values - 2 * np.pi)) < 1e-12


def test_lambda_raw_examples(grid256):
    const = SphereField(np.vstack([np.zeros(256), np.ones(256)]), grid256)
    assert not np.any(lambda_raw(const).values)
    assert np.max(np.abs(lambda_raw(identity_map(grid256)).values - 2 * np.pi)) < 1e-12


def test_lambda_raw_matches_fourier_path():
    g = CircleGrid(1024)
    u = random_spectral(g, 3, 120, 5)
    direct = lambda_raw(synthesize(u)).values
    spectral = synthesize(product_spectrum(u, u, build_table(120))).values
    assert np.linalg.norm(direct - spectral) / np.linalg.norm(direct) <= 1e-4


def test_gradient_product_blocking_is_invisible(grid256):
    u = synthesize(random_spectral(grid256, 2, 20, 1))
    v = synthesize(random_spectral(grid256, 2, 20, 2))
    a = gradient_product(u, v, block=256).values
    b = gradient_product(u, v, block=37).values
    assert np.max(np.abs(a - b)) <= 1e-13 * np.max(np.abs(a))


def test_divergence_of_symmetric_kernel_vanishes():
    g = CircleGrid(64)
    rng = np.random.default_rng(0)
    a = rng.standard_normal((64, 64))
    F = OffDiagonalKernel((a + a.T)[None], g, 0.5)
    assert not np.any(frac_divergence(F, 0.5).values)


@pytest.mark.parametrize("band", [1, 5, 16])
def test_divergence_of_gradient(band):
    g = CircleGrid(1024)
    c = random_spectral(g, 1, band, band)
    div = frac_divergence(frac_gradient_kernel(synthesize(c), 0.5), 0.5).values
    target = 2 * np.pi * synthesize(fractional_laplacian(c, 0.5)).values
    assert np.max(np.abs(div - target)) <= 1e-3 * np.max(np.abs(target))


def test_divergence_symbol_tends_to_2pi_abs_k():
    sym = divergence_symbol(1024)
    k = np.arange(1, 17)
    assert np.max(np.abs(sym[k] - 2 * np.pi * k) / (2 * np.pi * k)) < 1e-6


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_duality_with_omitted_diagonal(seed):
    g = CircleGrid(64)
    rng = np.random.default_rng(seed)
    F = OffDiagonalKernel(rng.standard_normal((1, 64, 64)), g, 0.5)
    phi = GridField(rng.standard_normal(64), g)
    dphi = frac_gradient_kernel(phi, 0.5)
    lhs = g.weight * np.sum(pair(F, dphi).values)
    rhs = g.weight * np.sum(phi.values * frac_divergence(F, 0.5, "omit").values)
    scale = od_norm(F) * od_norm(dphi)
    assert abs(lhs - rhs) <= 1e-6 * scale


def test_cjk_examples():
    for k in range(-5, 6):
        assert cjk(0, k) == 0.0 and cjk(k, 0) == 0.0
    for j in range(1, 65):
        assert cjk(j, -j) == pytest.approx(2 * np.pi * j, rel=1e-6)


def test_table_matches_closed_form_and_quadrature():
    J = 24
    table = build_table(J)
    assert np.array_equal(table.values, table.values.T)
    for j in range(-J, J + 1):
        for k in range(-J, J + 1):
            assert abs(table(j, k) - closed_form_cjk(j, k)) < 1e-10
            assert abs(table(j, k) - 2 * np.pi * math.sqrt(abs(j * k))) >= -1e-9
    for j, k in [(3, -7), (-5, 2), (4, 4), (9, -9), (-1, -6)]:
        assert cjk(j, k) == pytest.approx(closed_form_cjk(j, k), abs=1e-10)
    with pytest.raises(ConfigurationError):
        table(J + 1, 0)


def test_table_cauchy_schwarz_bound():
    J = 64
    t = build_table(J)
    js = np.arange(-J, J + 1)
    bound = 2 * np.pi * np.sqrt(np.outer(np.abs(js), np.abs(js)))
    assert np.all(np.abs(t.values) <= bound + 1e-9)


def test_table_csv_roundtrip(tmp_path):
    t = build_table(6)
    t.to_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "j,k,value"
    back = CjkTable.from_csv(tmp_path / "c.csv")
    assert back.J == 6 and np.array_equal(back.values, t.values)


def test_product_spectrum_examples(grid256):
    table = build_table(8)
    const = from_modes({0: 2.0}, grid256)
    u = random_spectral(grid256, 1, 8, 0)
    assert not np.any(product_spectrum(const, u, table).coeffs)
    e1 = from_modes({1: 1.0}, grid256)
    out = product_spectrum(e1, e1, table)
    assert out.coefficient(0) == 0.0  # C(1, 1) = 0: e^{ix}·e^{ix} pairs only same-sign modes
    # conjugate pairing: u = e^{ix}, v = e^{-ix}
    out = product_spectrum(e1, from_modes({-1: 1.0}, grid256), table)
    assert out.coefficient(0) == pytest.approx(2 * np.pi)
    # real two-component identity map: the synthesized product is the constant 2π
    ident = analyze(identity_map(grid256))
    prod = synthesize(product_spectrum(ident, ident, table)).values
    assert np.max(np.abs(prod - 2 * np.pi)) < 1e-12
    assert np.max(np.abs(prod - lambda_raw(identity_map(grid256)).values)) < 1e-12


def test_product_spectrum_preconditions():
    g = CircleGrid(64)
    u = random_spectral(g, 1, 20, 0)
    with pytest.raises(ConfigurationError):
        product_spectrum(u, u, build_table(10))
    with pytest.raises(ConfigurationError):
        product_spectrum(u, u, build_table(20))  # band 40 does not fit K = 31


def test_product_spectrum_against_pair():
    g = CircleGrid(1024)
    u = random_spectral(g, 3, 128, 11)
    v = random_spectral(g, 3, 128, 12)
    fast = synthesize(product_spectrum(u, v, build_table(128))).values
    direct = pair(frac_gradient_kernel(synthesize(u), 0.5, "limit"), frac_gradient_kernel(synthesize(v), 0.5, "limit"), "limit").values
    assert np.linalg.norm(fast - direct) / np.linalg.norm(direct) <= 1e-4


def test_omega_potential_structure(grid256):
    u = random_sphere(grid256, seed=2)
    om = omega_potential(u).values
    assert np.array_equal(om, -np.swapaxes(om, 0, 1))
    assert not np.any(om[np.arange(3), np.arange(3)])
    const = SphereField(np.vstack([np.zeros(256), np.zeros(256), np.ones(256)]), grid256)
    assert not np.any(omega_potential(const).values)


def test_identity_potential_is_divergence_free():
    om = omega_potential(identity_map(CircleGrid(1024)))
    assert np.max(np.abs(frac_divergence(om, 0.5).values)) <= 1e-3


def test_t_functional_examples():
    g = CircleGrid(64)
    u, v, w = (random_sphere(g, seed=s) for s in (1, 2, 3))
    const = GridField(np.ones((3, 64)), g)
    for args in [(const, v, w), (u, const, w), (u, v, const)]:
        assert np.max(np.abs(t_functional(*args).values)) == 0.0
    assert np.array_equal(t_functional(u, v, w).values, t_functional(u, w, v).values)


def test_decomposition_identity():
    u = random_sphere(CircleGrid(512), seed=9)
    lhs = u.values * lambda_raw(u, "omit").values
    rhs = pair(omega_potential(u), frac_gradient_kernel(u, 0.5)).values + t_functional(u, u, u).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-8 * np.max(np.abs(lhs))


def test_divfree_correction_on_identity_is_trivial():
    om = omega_potential(identity_map(CircleGrid(256)))
    out, info = divfree_correction(om, return_info=True)
    assert np.max(np.abs(info["h"])) < 1e-12
    assert np.max(np.abs(out.values - om.values)) < 1e-12


def test_divfree_correction_removes_gradient_part():
    g = CircleGrid(128)
    dg = frac_gradient_kernel(synthesize(random_spectral(g, 1, 10, 4, mean=False)), 0.5).values[0]
    om = OffDiagonalKernel(np.array([[np.zeros_like(dg), dg], [-dg, np.zeros_like(dg)]]), g, 0.5)
    before = np.max(np.abs(frac_divergence(om, 0.5).values))
    out = divfree_correction(om)
    assert np.max(np.abs(frac_divergence(out, 0.5).values)) <= 1e-3 * before
    assert np.array_equal(out.values, -np.swapaxes(out.values, 0, 1))


def test_divfree_correction_generic_and_mean_logging(caplog):
    g = CircleGrid(128)
    om = omega_potential(random_sphere(g, seed=5))
    before = np.max(np.abs(frac_divergence(om, 0.5).values))
    out, info = divfree_correction(om, return_info=True)
    after = frac_divergence(out, 0.5).values.reshape(3, 3, 128) - info["mean"][:, :, None]
    assert before / np.max(np.abs(after)) >= 1e3
    assert np.array_equal(out.values, -np.swapaxes(out.values, 0, 1))
    # the divergence of any kernel integrates to zero, so nothing is subtracted
    assert np.max(np.abs(info["mean"])) <= 1e-12 * before
    with caplog.at_level(logging.WARNING, logger="halflow.fractional_calculus"):
        divfree_correction(om, mean_tol=-1.0)
    assert any("mean" in r.message for r in caplog.records)


def test_od_norm_matches_energy(grid256):
    u = synthesize(random_spectral(grid256, 2, 30, 8))
    d = frac_gradient_kernel(u, 0.5, "limit")
    assert od_norm(d, "limit") ** 2 == pytest.approx(2 * np.pi * 2 * half_energy(u), rel=1e-10)
