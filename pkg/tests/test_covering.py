import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pkrg.covering import (BARRIER_RMAX, CoverFamily, all_covered, barrier_search, classify,
                           geometric_interval, goodness_threshold, greedy_disjoint, lattice_centers,
                           naughty_cover, refined_budget, refined_cover, retile, side_of,
                           surface_meets_cube, surface_sampling_hits, synthetic_bad, verdict,
                           verify_barrier, vitali_cover)
from pkrg.dimension import refined_exponent
from pkrg.errors import BarrierNotFoundError, DomainError
from pkrg.littlewood_paley import project_half, single
from pkrg.packets import Cube, periodic_delta
from pkrg.spectral_field import FrequencyGrid, SpectralField, rfft3

EPS = 0.01


def sup_dist(a, b, period=1.0):
    return np.max(np.abs(periodic_delta(np.asarray(a, float), np.asarray(b, float), period)), axis=-1)


# ----------------------------------------------------------------------------
# classification
# ----------------------------------------------------------------------------

def test_threshold_value():
    assert goodness_threshold(4, 9 / 8, 0.01) == pytest.approx(2.0**-2.04, rel=1e-14)


def test_verdict_flips_exactly_at_threshold():
    thr = goodness_threshold(5, 1.1, EPS)
    assert verdict(thr, thr) == "good"
    assert verdict(np.nextafter(thr, np.inf), thr) == "bad"
    assert verdict(0.0, thr) == "good"


def test_zero_field_all_good(grid64):
    z = SpectralField.zeros(grid64)
    recs = classify([(0.0, z), (0.5, z)], 4, (0.0, 0.5), alpha=1.1)
    assert len(recs) == len(lattice_centers(4, EPS))
    assert all(r.verdict == "good" and r.integral == 0.0 for r in recs)


def test_empty_window_raises(grid32):
    z = SpectralField.zeros(grid32)
    with pytest.raises(DomainError):
        classify([(0.0, z)], 3, (0.2, 0.2), alpha=1.1)
    with pytest.raises(DomainError):
        classify([(0.0, z)], 3, (0.5, 0.9), alpha=1.1)


def localized_band_field(grid, j, point, amplitude):
    """Band-``j`` projection of a grid impulse in the first component."""
    n = grid.n
    u = np.zeros((3, n, n, n))
    idx = tuple(int(round(p * n / grid.period)) % n for p in point)
    u[0][idx] = amplitude
    return SpectralField.from_half(grid, project_half(rfft3(u), grid, single(j)))


def test_localized_mode_makes_its_cube_bad(grid64):
    j, alpha = 4, 1.1
    point = (0.5, 0.5, 0.5)
    u = localized_band_field(grid64, j, point, 1.0)
    recs = classify([(0.0, u), (1.0, u)], j, (0.0, 1.0), alpha=alpha)
    vals = np.array([r.integral for r in recs])
    top = recs[int(np.argmax(vals))]
    assert top.cube.contains(np.array([point]))[0]
    thr = recs[0].threshold
    scale = 10.0 * thr / top.integral
    u2 = localized_band_field(grid64, j, point, math.sqrt(scale))
    recs2 = classify([(0.0, u2), (1.0, u2)], j, (0.0, 1.0), alpha=alpha)
    bad = [r for r in recs2 if r.verdict == "bad"]
    assert bad and any(r.cube.contains(np.array([point]))[0] for r in bad)
    far = [r for r in recs2 if sup_dist(r.cube.center, point) > 0.3]
    assert far and all(r.verdict == "good" for r in far)


def test_single_snapshot_integral_is_zero(grid32, rng):
    u = localized_band_field(grid32, 2, (0.25, 0.25, 0.25), 1e3)
    recs = classify([(0.0, u)], 2, (0.0, 1.0), alpha=1.1)
    assert all(r.integral == 0.0 for r in recs)


# ----------------------------------------------------------------------------
# Vitali cover
# ----------------------------------------------------------------------------

def test_vitali_empty():
    fam = vitali_cover([], j=4, epsilon=EPS)
    assert len(fam) == 0 and fam.meta["kernel_size"] == 0


def test_vitali_single_cube_covers_dilate():
    q = Cube((0.3, 0.6, 0.9), 6, EPS)
    fam = vitali_cover([q], alpha=1.1)
    assert len(fam) <= 216
    dil = CoverFamily(6, EPS, np.array([q.center]), "bad")
    # the 5-dilate shares the center and has five times the side
    pts = np.random.default_rng(3).uniform(-1, 1, (4000, 3)) * 2.5 * q.side + np.array(q.center)
    assert np.all(fam.covers(pts))
    assert all_covered(dil, fam)


def test_vitali_mixed_levels_raise():
    with pytest.raises(DomainError):
        vitali_cover([Cube((0.1,) * 3, 4, EPS), Cube((0.5,) * 3, 5, EPS)])
    with pytest.raises(DomainError):
        vitali_cover([Cube((0.1,) * 3, 4, EPS)], j=5)


@pytest.mark.parametrize("placement", ["uniform", "clustered", "shell", "planar"])
def test_vitali_kernel_disjoint_and_covering(placement):
    rng = np.random.default_rng(7)
    j = 6
    centers = synthetic_bad(j, 300, placement, rng, EPS)
    bad = CoverFamily(j, EPS, centers, "bad")
    fam = vitali_cover(bad, alpha=1.1)
    kern = bad.centers[fam.meta["kernel"]]
    d = sup_dist(kern[:, None, :], kern[None, :, :])
    np.fill_diagonal(d, np.inf)
    assert np.all(d >= bad.side * (1 - 1e-9))
    assert all_covered(bad, fam)
    assert len(fam) <= 216 * fam.meta["kernel_size"]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), excl=st.floats(0.01, 0.2))
def test_greedy_disjoint_property(seed, excl):
    c = np.random.default_rng(seed).uniform(0, 1, (80, 3))
    picks = greedy_disjoint(c, excl, 1.0)
    p = c[picks]
    d = sup_dist(p[:, None, :], p[None, :, :])
    np.fill_diagonal(d, np.inf)
    assert np.all(d >= excl * (1 - 1e-9))
    # maximality: every candidate is within the exclusion of some pick
    assert np.all(np.min(sup_dist(c[:, None, :], p[None, :, :]), axis=1) < excl)


def test_retile_counts():
    assert len(retile(np.array([[0.5, 0.5, 0.5]]), 5.0, 0.01, 1.0)) == 125
    assert len(retile(np.array([[0.5, 0.5, 0.5]]), 2.5, 0.01, 1.0)) == 27


# ----------------------------------------------------------------------------
# naughty cubes
# ----------------------------------------------------------------------------

def test_naughty_empty():
    covers = {k: CoverFamily(k, EPS, np.zeros((0, 3)), "A_j") for k in range(6, 9)}
    bj, bjk = naughty_cover(covers, 6, 2.0**-12, 1.1)
    assert len(bj) == 0 and all(len(f) == 0 for f in bjk.values())


@pytest.mark.parametrize("eta", [0.0, 1.0, -0.5, 2.0])
def test_naughty_eta_range(eta):
    with pytest.raises(DomainError):
        naughty_cover({}, 6, eta, 1.1)


def test_naughty_clustered_under_budget():
    rng = np.random.default_rng(5)
    j, alpha, eta = 6, 1.1, 2.0**-12
    covers = {}
    for k in range(j, j + 3):
        bad = CoverFamily(k, EPS, synthetic_bad(k, 40, "clustered", rng, EPS), "bad")
        covers[k] = vitali_cover(bad, alpha=alpha)
    bj, bjk = naughty_cover(covers, j, eta, alpha)
    for k, fam in bjk.items():
        assert fam.k == k
        assert fam.meta["picks"] <= fam.meta["pick_limit"] + 1e-9
        assert len(fam) <= 64 * fam.budget
    assert len(bj) <= 64 * bj.budget
    # every naughty pick sits near some A_k cube
    for k, fam in bjk.items():
        if len(fam):
            near = sup_dist(fam.centers[:, None, :], covers[k].centers[None, :, :]).min(axis=1)
            assert np.all(near <= 2 * side_of(j, EPS))


# ----------------------------------------------------------------------------
# geometric interval and barriers
# ----------------------------------------------------------------------------

def test_interval_concentric():
    a, b = 0.1, 0.01
    assert geometric_interval((0.5,) * 3, a, (0.5,) * 3, b) == (0.0, pytest.approx(b / a))


def test_interval_inner_on_boundary():
    a, b = 0.1, 0.01
    y = np.array([0.5, 0.5, 0.5])
    x = y + np.array([b, 0.0, 0.0])
    lo, hi = geometric_interval(y, a, x, b)
    assert lo == pytest.approx(0.0, abs=1e-15) and hi == pytest.approx(2 * b / a)
    for r in np.linspace(1e-4, 3 * b / a, 40):
        assert surface_meets_cube(y, r * a, x, b) == (r < 2 * b / a)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_interval_matches_sampling(seed):
    rng = np.random.default_rng(seed)
    a = 0.05
    b = rng.uniform(0.002, 0.02)
    y = np.full(3, 0.5)
    x = y + rng.uniform(-0.08, 0.08, 3)
    lo, hi = geometric_interval(y, a, x, b)
    rs = np.linspace(0.01, 3.0, 150)
    hits = surface_sampling_hits(y, a, x, b, rs)
    inside = (rs > lo + 1e-9) & (rs < hi - 1e-9)
    outside = (rs < lo - 1e-9) | (rs > hi + 1e-9)
    assert np.all(hits[inside])
    assert not np.any(hits[outside])


def test_barrier_no_cubes():
    res = barrier_search((0.5,) * 3, 8, {8: CoverFamily(8, EPS, np.zeros((0, 3)), "B_j")})
    assert res.r == pytest.approx(2.0**-11)
    assert res.verified and res.f_l1 == 0.0


def test_barrier_avoids_single_cube():
    j1 = 4
    x = np.array([0.5, 0.5, 0.5])
    a = 0.5 * side_of(j1, EPS)
    k = 20
    b = 0.5 * side_of(k, EPS)
    y = x + np.array([a * 0.5 * BARRIER_RMAX, 0.0, 0.0])
    covers = {k: CoverFamily(k, EPS, y[None, :], "B_j")}
    res = barrier_search(x, j1, covers)
    lo, hi = geometric_interval(x, a, y, b)
    assert 0 < res.r < BARRIER_RMAX
    assert not (lo <= res.r <= hi)
    assert res.verified and verify_barrier(x, j1, res.r, covers, EPS, 1.0)
    assert not surface_meets_cube(x, res.r * a, y, b)
    plateau = (res.f_grid > lo) & (res.f_grid < hi)
    assert np.all(res.f_values[plateau] == 1)
    assert np.all(res.f_values[(res.f_grid < lo) | (res.f_grid > hi)] == 0)


def test_barrier_not_found_when_blocked():
    j1 = 4
    x = np.array([0.5, 0.5, 0.5])
    covers = {j1: CoverFamily(j1, EPS, x[None, :], "B_j")}
    with pytest.raises(BarrierNotFoundError) as exc:
        barrier_search(x, j1, covers)
    assert exc.value.l1_norm > 0


# ----------------------------------------------------------------------------
# refined cover
# ----------------------------------------------------------------------------

def test_refined_empty():
    fam = refined_cover({}, 8, 0.5, alpha=1.1)
    assert len(fam) == 0
    assert fam.meta["missing"] == list(range(math.floor(0.5 * 8 - 10), 9))


def test_refined_covers_every_source_cube():
    rng = np.random.default_rng(9)
    j, theta = 8, 0.75
    covers = {k: CoverFamily(k, EPS, rng.uniform(0, 1, (6, 3)), "B_j") for k in range(5, j + 1)}
    fam = refined_cover(covers, j, theta, alpha=1.1)
    for k, src in covers.items():
        assert all_covered(src, fam), k
    k_lo = math.floor(theta * j - 10)
    assert fam.meta["k_range"] == (k_lo, j)
    assert fam.meta["missing"] == list(range(k_lo, 5))


@pytest.mark.parametrize("alpha", [1.0, 1.1, 1.2, 1.25])
def test_refined_budget_exponent(alpha):
    j = 10
    assert math.log2(refined_budget(j, alpha, 0.0)) == pytest.approx(j * (-16 * alpha**2 + 16 * alpha + 5) / 3)
    assert math.log2(refined_budget(j, alpha, 0.02)) == pytest.approx(j * refined_exponent(alpha, 0.02))
