import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pkrg.covering import BARRIER_RMAX, barrier_half_side, barrier_search
from pkrg.dimension import theta_exact
from pkrg.errors import DomainError
from pkrg.estimates import (EstimateConfig, FluxFields, estimate_terms, flux_identity, probe_rates,
                            regularity_weights, rho_formula, theta)
from pkrg.littlewood_paley import project, single
from pkrg.packets import Cube, make_cutoff
from pkrg.solver import Operators, shear_mode, taylor_green
from pkrg.spectral_field import FrequencyGrid, SpectralField, random_field


@settings(max_examples=100, deadline=None)
@given(a=st.fractions(Fraction(101, 100), Fraction(3, 2)), e=st.fractions(Fraction(1, 1000), Fraction(1, 21)))
def test_theta_identity(a, e):
    th = theta_exact(a, e)
    assert Fraction(3, 2) * th == 2 * a - 1 - e
    assert theta(float(a), float(e)) == pytest.approx(float(th), rel=1e-14)


def test_flux_zero(grid32):
    assert flux_identity(SpectralField.zeros(grid32), Cube((0.5,) * 3, 1), 2, 1.1) == (0.0, 0.0)


def test_flux_requires_divergence_free(grid32, rng):
    with pytest.raises(DomainError):
        flux_identity(random_field(grid32, rng), None, 2, 1.1)


@pytest.mark.parametrize("j", [1, 2, 3])
def test_shear_flux_closed_form(grid32, j):
    alpha = 1.2
    u = shear_mode(grid32, 0.8, k=2**j)
    I, J = flux_identity(u, None, j, alpha)
    lam = (2 * math.pi * 2**j) ** (2 * alpha)
    assert J == pytest.approx(0.0, abs=1e-12 * abs(I))
    assert I == pytest.approx(-lam * u.norm() ** 2, rel=1e-12)
    ops = Operators(grid32, alpha, 1e-3)
    rate = probe_rates(u.half, ops, {"torus": np.ones(grid32.shape)}, [j])["torus", j]
    assert rate == pytest.approx(2 * I, rel=1e-8)


def test_taylor_green_flux_identity():
    grid = FrequencyGrid(32)
    tg = taylor_green(grid)
    u = SpectralField(grid, 5 * tg.coeffs, divergence_free=True)
    ops = Operators(grid, 1.1, 1e-3)
    ff = FluxFields(u, ops)
    weights, expect = {}, {}
    for i, c in enumerate([(0.3, 0.4, 0.5), (0.7, 0.2, 0.9)]):
        for j in (1, 2):
            phi = make_cutoff(Cube(c, j), grid).samples
            weights[i, j] = phi * phi
            I, J = ff.flux(phi * phi, j)
            expect[i, j] = 2 * (I + J)
    rates = probe_rates(u.half * ops.mask, ops, weights, (1, 2))
    for (i, j), e in expect.items():
        if abs(e) > 1e-8:
            assert abs(rates[(i, j), j] - e) <= 1e-4 * abs(e)
        # nonlinear transfer is present, not just decay
    assert any(abs(ff.flux(w, j)[1]) > 1e-6 for (i, j), w in weights.items())


def test_flux_with_torus_cutoff_matches_band_energy_rate(grid32):
    tg = taylor_green(grid32)
    u = SpectralField(grid32, 3 * tg.coeffs, divergence_free=True)
    I, J = flux_identity(u, None, 1, 1.1)
    assert I < 0


def test_zero_field_terms(grid64):
    t = estimate_terms(SpectralField.zeros(grid64), Cube((0.5,) * 3, 3), 3)
    for name in ("I", "J", "G_diss", "G_low_loc", "G_loc", "G_hh", "e_diss", "e_vl"):
        assert getattr(t, name) == 0.0
    assert t.measured_c == 0.0 and t.measured_diss == 0.0


def test_single_band_terms(grid64):
    # |xi| = 2**3 exactly puts all spectrum in band 3: empty low and high windows
    c = np.zeros((3,) + grid64.shape, complex)
    c[1, 8, 0, 0] = c[1, -8, 0, 0] = 0.5
    u = SpectralField(grid64, c, divergence_free=True)
    t = estimate_terms(u, Cube((0.4, 0.5, 0.6), 3), 3, EstimateConfig(1.1, 0.01))
    assert t.G_low_loc == 0.0 and t.G_hh == 0.0
    assert t.G_diss > 0 and t.G_loc > 0
    assert t.theta == pytest.approx(2 * (2 * 1.1 - 1 - 0.01) / 3)
    assert t.large_j_waived


def test_terms_nonnegative_and_clipping(grid64, rng):
    u = SpectralField(grid64, random_field(grid64, rng, divergence_free=True).coeffs, divergence_free=True)
    t = estimate_terms(u, Cube((0.5,) * 3, 3), 3)
    for name in ("G_diss", "G_low_loc", "G_loc", "G_hh", "e_diss", "e_vl"):
        assert getattr(t, name) >= 0.0
    assert "loc" in t.clipped and "hh" in t.clipped
    row = t.row()
    assert set(row) >= {"time", "cube_id", "j", "I", "J", "lhs_rate", "measured_c"}


def test_diss_ratio_positive_for_decay(grid64):
    u = shear_mode(grid64, 1.0, k=8)
    t = estimate_terms(u, Cube((0.5,) * 3, 3), 3, EstimateConfig(1.2, 0.01))
    assert t.measured_diss > 0


# -- regularity weights ------------------------------------------------------

def test_rho_examples():
    assert rho_formula(9 / 8, 0.01, 50) == pytest.approx(0.55, abs=1e-12)
    assert rho_formula(1.2, 0.01, int(100 / 0.01)) == pytest.approx(15 - 4 * 1.2)


@settings(max_examples=200, deadline=None)
@given(a=st.floats(1.001, 1.5), e=st.floats(1e-4, 0.049), d1=st.integers(0, 10**6), d2=st.integers(0, 10**6))
def test_rho_range_and_monotone(a, e, d1, d2):
    lo, hi = sorted((d1, d2))
    r1, r2 = rho_formula(a, e, lo), rho_formula(a, e, hi)
    assert 5 - 4 * a - 1e-12 <= r1 <= r2 <= 15 - 4 * a + 1e-12


def empty_barrier(x, j1=1):
    return barrier_search(x, j1, {}, 0.01)


def test_empty_barrier_radius():
    b = empty_barrier((0.5, 0.5, 0.5))
    assert b.r == BARRIER_RMAX / 2 and b.verified and b.f_l1 == 0.0


def test_delta_for_concentric_cube():
    x = (0.5, 0.5, 0.5)
    b = empty_barrier(x)
    a = barrier_half_side(b)
    j, eps = 20, 0.01
    w = regularity_weights(Cube(x, j, eps), b, 1.2)
    # oracle: first ancestor whose half side exceeds the barrier half side
    k = next(k for k in range(j + 1) if 0.5 * 2.0 ** (-(j - k) * (1 - eps)) > a)
    assert w.delta == k
    assert w.rho == pytest.approx(rho_formula(1.2, eps, k))


def test_delta_zero_on_surface():
    x = np.array([0.5, 0.5, 0.5])
    b = empty_barrier(x)
    a = barrier_half_side(b)
    q = Cube(tuple(x + np.array([0.9 * a, 0.0, 0.0])), 14)
    assert q.half_side > 0.1 * a
    assert regularity_weights(q, b, 1.2).delta == 0


def test_cube_outside_barrier():
    b = empty_barrier((0.5, 0.5, 0.5))
    with pytest.raises(DomainError):
        regularity_weights(Cube((0.1, 0.1, 0.1), 10), b, 1.2)
