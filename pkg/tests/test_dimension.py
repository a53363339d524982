import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pkrg.dimension import (CubeSet, bound_hausdorff, bound_naive, bound_refined, box_count,
                            cantor_dust, estimate_dimension, fit_dimension, naive_exponent,
                            refined_exponent, theta_exact)
from pkrg.errors import DomainError

SCALES = [2.0**-k for k in range(1, 7)]


@pytest.mark.parametrize("r", SCALES)
def test_single_point(r):
    assert box_count(np.array([[0.3, 0.7, 0.1]]), r) == 1


@pytest.mark.parametrize("r", [0.5, 0.3, 0.25, 0.1, 1 / 16])
def test_full_torus(r):
    full = CubeSet(np.array([[0.5, 0.5, 0.5]]), 0.5)
    assert box_count(full, r) == math.ceil(1 / r - 1e-12) ** 3
    mask = np.ones((16, 16, 16), bool)
    if (1 / r) % 1 == 0:
        assert box_count(mask, r) == round(1 / r) ** 3


def test_cantor_dust_count():
    assert box_count(cantor_dust(3), 3.0**-3) == 512
    assert box_count(cantor_dust(3), 3.0**-2) == 64


def test_cantor_dust_slope():
    dust = cantor_dust(5)
    est = estimate_dimension(dust, [3.0**-k for k in range(1, 6)], 1.1)
    assert est.slope == pytest.approx(3 * math.log(2) / math.log(3), rel=1e-9)


@pytest.mark.parametrize("r", [1.0, 1.5, 4.0])
def test_coarse_scale(r):
    assert box_count(np.random.default_rng(0).uniform(0, 1, (20, 3)), r) == 1
    assert box_count(cantor_dust(2), r) == 1


def test_empty_and_bad_scale():
    assert box_count(np.zeros((0, 3)), 0.1) == 0
    assert box_count(CubeSet(np.zeros((0, 3)), 0.1), 0.1) == 0
    with pytest.raises(DomainError):
        box_count(np.zeros((1, 3)), 0.0)


@pytest.mark.parametrize("counts", [
    [(0.5, 1), (0.25, 2)],
    [(0.5, 1), (0.4, 2), (0.3, 3)],
    [(0.5, 0), (0.25, 2), (0.125, 4)],
    [(-0.5, 1), (0.25, 2), (0.125, 4)],
])
def test_fit_rejects_degenerate(counts):
    with pytest.raises(DomainError):
        fit_dimension(counts)


def test_fit_exact_power_law():
    fit = fit_dimension([(2.0**-k, 4**k) for k in range(1, 6)])
    assert fit.slope == pytest.approx(2.0, rel=1e-12)
    assert fit.residual < 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), k=st.integers(1, 6))
def test_count_monotone_in_scale(seed, k):
    pts = np.random.default_rng(seed).uniform(0, 1, (50, 3))
    assert box_count(pts, 2.0**-(k + 1)) >= box_count(pts, 2.0**-k)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), r=st.floats(0.02, 0.9))
def test_count_monotone_in_set(seed, r):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0, 1, (30, 3))
    h = rng.uniform(0.001, 0.05, 30)
    sub = CubeSet(c[:10], h[:10])
    full = CubeSet(c, h)
    assert box_count(sub, r) <= box_count(full, r)


@pytest.mark.parametrize("alpha,naive,refined,haus", [
    (Fraction(1), Fraction(19, 9), Fraction(5, 3), Fraction(1)),
    (Fraction(9, 8), Fraction(91, 72), Fraction(11, 12), Fraction(1, 2)),
    (Fraction(5, 4), Fraction(0), Fraction(0), Fraction(0)),
])
def test_exact_bounds(alpha, naive, refined, haus):
    assert bound_naive(alpha) == naive
    assert bound_refined(alpha) == refined
    assert bound_hausdorff(alpha) == haus


@settings(max_examples=200, deadline=None)
@given(a=st.fractions(Fraction(1), Fraction(5, 4)))
def test_refined_below_naive(a):
    assert bound_refined(a) <= bound_naive(a)
    assert bound_hausdorff(a) <= bound_refined(a)


@settings(max_examples=200, deadline=None)
@given(a=st.fractions(Fraction(1), Fraction(5, 4)), e=st.fractions(Fraction(0), Fraction(1, 20)))
def test_exponent_algebra(a, e):
    expanded = (-16 * a**2 + 16 * a * (1 + e) + 5 - 17 * e - 4 * e**2) / 3
    assert refined_exponent(a, e) == expanded
    th = theta_exact(a, e)
    assert naive_exponent(a, e) == 3 - 3 * e + th * th * (2 - 4 * a + 2 * e)
    assert refined_exponent(a, 0) == bound_refined(a)
    assert naive_exponent(a, 0) == bound_naive(a)
