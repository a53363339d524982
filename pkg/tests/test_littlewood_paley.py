import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pkrg.errors import BandRangeError, DomainError
from pkrg.littlewood_paley import (band_symbol, bernstein_ratio, build_bump, geq, glue,
                                   lattice_band_range, leq, p_j, paraproduct_residuals,
                                   paraproduct_split, product, project, resolved_band_range,
                                   single, smooth_step, symbol_table, young_constant)
from pkrg.spectral_field import (FrequencyGrid, SpectralField, fractional_laplacian, leray_project,
                                 random_field, rfft3)


def mode_field(grid, k, amp=1.0, comp=0):
    """Real cosine mode ``amp cos(2 pi k.x / L)`` in one component."""
    x = grid.axis_points() * 2 * np.pi / grid.period
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    u = np.zeros((3,) + grid.shape)
    u[comp] = amp * np.cos(k[0] * X + k[1] * Y + k[2] * Z)
    return SpectralField.from_half(grid, rfft3(u))


# -- the smooth step ---------------------------------------------------------

def test_step_plateaus():
    assert smooth_step(0.5) == 1.0
    assert smooth_step(3.0) == 0.0
    assert smooth_step(1.0) == 1.0 and smooth_step(2.0) == 0.0


def test_step_midpoint_oracle():
    f = lambda t: math.exp(-1.0 / t)
    ref = f(0.5) / (f(0.5) + f(0.5))
    assert smooth_step(1.5) == pytest.approx(ref, abs=1e-15)
    assert ref == 0.5


def test_glue_zero_for_nonpositive():
    assert np.all(glue(np.array([-1.0, 0.0])) == 0.0)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(0.0, 4.0), y=st.floats(0.0, 4.0))
def test_step_monotone(x, y):
    lo, hi = min(x, y), max(x, y)
    assert smooth_step(hi) <= smooth_step(lo)


@settings(max_examples=300, deadline=None)
@given(xi=st.floats(1e-3, 1e3), j=st.integers(-3, 8))
def test_symbol_support(xi, j):
    v = p_j(xi, j)
    if xi <= 2.0 ** (j - 1) or xi >= 2.0 ** (j + 1):
        assert v == 0.0
    assert 0.0 <= v <= 1.0


@settings(max_examples=300, deadline=None)
@given(xi=st.floats(1e-3, 1e3), j=st.integers(-3, 8), gap=st.integers(2, 6))
def test_support_separation(xi, j, gap):
    assert p_j(xi, j) * p_j(xi, j + gap) == 0.0


def test_bump_is_difference_of_steps():
    x = np.linspace(-3, 3, 101)
    assert np.array_equal(build_bump(x), smooth_step(np.abs(x)) - smooth_step(2 * np.abs(x)))


@pytest.mark.parametrize("n,period", [(32, 1.0), (64, 1.0), (64, 0.5)])
def test_partition_of_unity_on_lattice(n, period):
    grid = FrequencyGrid(n, period)
    lo, hi = lattice_band_range(grid)
    xi = grid.xi(half=True)
    total = sum(p_j(xi, j) for j in range(lo, hi + 1))
    nz = xi > 0
    assert np.max(np.abs(total[nz] - 1.0)) <= 1e-12
    assert total[0, 0, 0] == 0.0


@pytest.mark.parametrize("n,period,expected", [(64, 1.0, (1, 4)), (128, 0.5, (1, 6)), (32, 1.0, (1, 3))])
def test_resolved_range(n, period, expected):
    assert resolved_band_range(FrequencyGrid(n, period)) == expected


def test_symbol_table_rows():
    rows = symbol_table([2, 3], 16.0, bins=32)
    assert len(rows) == 64
    assert all(0.0 <= v <= 1.0 for _, _, v in rows)


# -- projections -----------------------------------------------------------

@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_single_mode_projection(grid64, j):
    f = mode_field(grid64, (2**j, 0, 0))
    out = project(f, single(j))
    assert (out - f).norm() <= 1e-13 * f.norm()
    far = j + 2 if j + 3 > lattice_band_range(grid64)[1] else j + 3
    assert project(f, single(far)).norm() <= 1e-15 * f.norm()


def test_bands_sum_to_identity(grid32, rng):
    f = random_field(grid32, rng)
    lo, hi = lattice_band_range(grid32)
    acc = SpectralField.zeros(grid32)
    for j in range(lo, hi + 1):
        acc = acc + project(f, single(j))
    assert np.max(np.abs(acc.coeffs - f.coeffs)) <= 1e-12 * np.max(np.abs(f.coeffs))


@pytest.mark.parametrize("j", [0, 2, 3])
def test_leq_plus_geq(grid32, rng, j):
    f = random_field(grid32, rng)
    s = project(f, leq(j)) + project(f, geq(j + 1))
    assert np.max(np.abs(s.coeffs - f.coeffs)) <= 1e-12 * np.max(np.abs(f.coeffs))


def test_projection_commutes_with_multipliers(grid32, rng):
    f = random_field(grid32, rng)
    a = project(fractional_laplacian(f, 1.2), single(2))
    b = fractional_laplacian(project(f, single(2)), 1.2)
    assert (a - b).norm() <= 1e-12 * a.norm()
    c = project(leray_project(f), single(3))
    d = leray_project(project(f, single(3)))
    assert (c - d).norm() <= 1e-12 * c.norm()


def test_unresolved_band_rejected(grid64, rng):
    f = random_field(grid64, rng)
    with pytest.raises(BandRangeError):
        paraproduct_split(f, f, 5)


# -- paraproduct -----------------------------------------------------------

def test_paraproduct_residual_random_pair(grid32, rng):
    f, g = random_field(grid32, rng), random_field(grid32, rng)
    for j, (res, ref) in paraproduct_residuals(f, g).items():
        assert res <= 1e-10 * f.norm() * g.norm()
        assert ref > 0


def test_split_reconstructs_product(grid32, rng):
    f, g = random_field(grid32, rng), random_field(grid32, rng)
    fg = product(f, g)
    for j in (1, 2, 3):
        terms = paraproduct_split(f, g, j)
        d = project(terms.total() - fg, single(j))
        assert d.norm() <= 1e-10 * f.norm() * g.norm()


def test_local_interaction_only(grid64):
    # f in band 4, g in band 0: at j = 4 only the local term survives
    f = mode_field(grid64, (16, 0, 0))
    g = mode_field(grid64, (1, 0, 0))
    t = paraproduct_split(f, g, 4)
    scale = f.norm() * g.norm()
    assert project(t.loc_low, single(4)).norm() <= 1e-14 * scale
    assert project(t.low_loc, single(4)).norm() <= 1e-14 * scale
    assert project(t.hh, single(4)).norm() <= 1e-14 * scale
    assert project(t.loc, single(4)).norm() > 0.1 * scale


def test_high_high_only(grid64):
    # spectrum in bands >= 4 only; the difference frequency lands in band 1
    a = mode_field(grid64, (16, 0, 0))
    b = mode_field(grid64, (18, 0, 0))
    f = a + b
    t = paraproduct_split(f, f, 1)
    pj = project(product(f, f), single(1))
    assert pj.norm() > 0.1
    assert (project(t.hh, single(1)) - pj).norm() <= 1e-12 * f.norm() ** 2
    for other in (t.loc_low, t.low_loc, t.loc):
        assert project(other, single(1)).norm() <= 1e-14 * f.norm() ** 2


# -- Bernstein and Young ---------------------------------------------------

def test_bernstein_equal_exponents(grid32, rng):
    f = random_field(grid32, rng)
    assert bernstein_ratio(f, 2, 2.0, 2.0) == pytest.approx(1.0, rel=1e-14)


def test_bernstein_bad_exponents(grid32, rng):
    with pytest.raises(DomainError):
        bernstein_ratio(random_field(grid32, rng), 2, 3.0, 2.0)


@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_bernstein_cosine_family(grid64, j):
    f = mode_field(grid64, (2**j, 0, 0))
    r = bernstein_ratio(f, j, 2.0, math.inf)
    assert r * 2.0 ** (1.5 * j) == pytest.approx(math.sqrt(2.0), rel=1e-12)


def impulse_field(grid, rng):
    """Randomly placed point impulse with a random vector amplitude."""
    u = np.zeros((3,) + grid.shape)
    idx = tuple(rng.integers(0, grid.n, 3))
    u[(slice(None),) + idx] = rng.standard_normal(3)
    return SpectralField.from_half(grid, rfft3(u))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_bernstein_random_band_stability(seed):
    # a band-projected impulse saturates the inequality, so the ratio is j-stable
    grid = FrequencyGrid(64, 0.5)
    f = impulse_field(grid, np.random.default_rng(seed))
    ratios = [bernstein_ratio(f, j, 2.0, math.inf, oversample=2) for j in (3, 4, 5)]
    assert max(ratios) <= 2.0 * min(ratios)


def test_bernstein_white_noise_below_impulse():
    grid = FrequencyGrid(64, 0.5)
    noise = random_field(grid, np.random.default_rng(4))
    peak = impulse_field(grid, np.random.default_rng(0))
    for j in (3, 4, 5):
        assert bernstein_ratio(noise, j, 2.0, math.inf) <= 2.0 * bernstein_ratio(peak, j, 2.0, math.inf)


def test_bernstein_zero_band(grid32):
    assert bernstein_ratio(SpectralField.zeros(grid32), 2, 2.0, math.inf) == 0.0


def test_young_constant_stable(grid64):
    cs = [young_constant(grid64, j) for j in (1, 2, 3, 4)]
    assert all(c >= 1.0 - 1e-12 for c in cs)
    assert max(cs) <= 2.0 * min(cs)
