"""Box counting and the closed-form dimension bounds.

The bounds accept floats or :class:`fractions.Fraction`; with fractions the
arithmetic is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError


def bound_hausdorff(alpha):
    """``5 - 4 alpha``."""
    return 5 - 4 * alpha


def bound_refined(alpha):
    """``(-16 alpha**2 + 16 alpha + 5) / 3``."""
    return (-16 * alpha**2 + 16 * alpha + 5) / Fraction(3) if isinstance(alpha, (int, Fraction)) \
        else (-16 * alpha**2 + 16 * alpha + 5) / 3


def bound_naive(alpha):
    """``(-64 alpha**3 + 96 alpha**2 - 48 alpha + 35) / 9``."""
    num = -64 * alpha**3 + 96 * alpha**2 - 48 * alpha + 35
    return num / Fraction(9) if isinstance(alpha, (int, Fraction)) else num / 9


def theta_exact(alpha, epsilon):
    return Fraction(2) * (2 * alpha - 1 - epsilon) / 3


def refined_exponent(alpha, epsilon):
    """Growth exponent of the refined cover count, ``3 - 3 eps + theta (2 - 4 alpha + 2 eps)``.

    Expands to ``(-16 a**2 + 16 a (1+eps) + 5 - 17 eps - 4 eps**2) / 3``.
    """
    th = 2 * (2 * alpha - 1 - epsilon) / 3
    return 3 - 3 * epsilon + th * (2 - 4 * alpha + 2 * epsilon)


def naive_exponent(alpha, epsilon):
    """Growth exponent ``3 - 3 eps + theta**2 (2 - 4 alpha + 2 eps)`` of the naive cover count."""
    th = 2 * (2 * alpha - 1 - epsilon) / 3
    return 3 - 3 * epsilon + th * th * (2 - 4 * alpha + 2 * epsilon)


# ----------------------------------------------------------------------------
# box counting
# ----------------------------------------------------------------------------

@dataclass
class CubeSet:
    """Union of open axis-aligned cubes on a periodic box.

    Attributes
    ----------
    centers : ndarray, shape (m, 3)
    half_sides : ndarray, shape (m,)
    period : float
    """

    centers: np.ndarray
    half_sides: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        self.centers = np.asarray(self.centers, float).reshape(-1, 3)
        hs = np.asarray(self.half_sides, float)
        self.half_sides = np.broadcast_to(hs, (len(self.centers),)).copy()

    def __len__(self):
        return len(self.centers)


def _boxes_for_points(points: np.ndarray, r: float, m: int, period: float) -> int:
    idx = np.floor((np.mod(points, period)) / r).astype(np.int64) % m
    keys = (idx[:, 0] * m + idx[:, 1]) * m + idx[:, 2]
    return int(np.unique(keys).size)


def _boxes_for_cubes(cs: CubeSet, r: float, m: int) -> int:
    """Grid boxes of side ``r`` meeting the interior of some cube."""
    tol = 1e-9 * r
    keys = []
    for c, h in zip(cs.centers, cs.half_sides):
        if 2 * h >= cs.period:
            return m**3
        ranges = []
        for ax in range(3):
            lo = math.floor((c[ax] - h + tol) / r)
            hi = math.ceil((c[ax] + h - tol) / r) - 1
            ranges.append(np.arange(lo, hi + 1) % m)
        a, b, d = np.meshgrid(*ranges, indexing="ij")
        keys.append(((a * m + b) * m + d).ravel())
    if not keys:
        return 0
    return int(np.unique(np.concatenate(keys)).size)


def box_count(obj, r: float, period: float = 1.0) -> int:
    """Grid-anchored count of boxes of side ``r`` meeting ``obj``.

    ``obj`` is an ``(m, 3)`` point array, a boolean grid mask of shape
    ``(n, n, n)`` covering ``[0, period)**3`` or a :class:`CubeSet`.  The
    count is an upper bound on the minimal covering number at scale ``r``.
    A scale at or above the period returns 1 for a nonempty set.
    """
    if not r > 0:
        raise DomainError("scale must be positive")
    if isinstance(obj, CubeSet):
        if len(obj) == 0:
            return 0
        if r >= obj.period:
            return 1
        m = math.ceil(obj.period / r - 1e-12)
        return _boxes_for_cubes(obj, r, m)
    arr = np.asarray(obj)
    if arr.dtype == bool and arr.ndim == 3:
        n = arr.shape[0]
        idx = np.argwhere(arr)
        pts = (idx + 0.5) * (period / n)
    else:
        pts = arr.reshape(-1, 3).astype(float)
    if len(pts) == 0:
        return 0
    if r >= period:
        return 1
    m = math.ceil(period / r - 1e-12)
    return _boxes_for_points(pts, r, m, period)


@dataclass
class DimensionFit:
    slope: float
    intercept: float
    residual: float
    scales: list


def fit_dimension(counts) -> DimensionFit:
    """Least-squares slope of ``log N`` against ``-log r``.

    Parameters
    ----------
    counts : sequence of (r, N)
        At least three scales spanning two octaves, every ``N >= 1``.
    """
    pts = sorted((float(r), int(n)) for r, n in counts)
    if len(pts) < 3:
        raise DomainError("need at least three scales")
    rs = np.array([p[0] for p in pts])
    ns = np.array([p[1] for p in pts], float)
    if np.any(rs <= 0) or np.any(ns < 1):
        raise DomainError("scales must be positive and counts at least one")
    if rs.max() / rs.min() < 4.0 - 1e-12:
        raise DomainError("scales must span at least two octaves")
    x, y = -np.log(rs), np.log(ns)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([slope, icpt]) - y) ** 2)))
    return DimensionFit(float(slope), float(icpt), resid, pts)


def cantor_dust(levels: int) -> CubeSet:
    """Middle-thirds Cantor dust in ``[0, 1)**3`` after ``levels`` subdivisions."""
    c = np.array([[0.5, 0.5, 0.5]])
    h = 0.5
    for _ in range(levels):
        h /= 3.0
        shifts = np.array([[sx, sy, sz] for sx in (-2, 2) for sy in (-2, 2) for sz in (-2, 2)]) * h
        c = (c[:, None, :] + shifts[None, :, :]).reshape(-1, 3)
    return CubeSet(c, h, 1.0)


@dataclass
class DimensionEstimate:
    """Fitted slope plus the three closed-form bounds for a given exponent."""

    scales: list
    slope: float
    residual: float
    alpha: float
    bound_naive: float = field(init=False)
    bound_refined: float = field(init=False)
    bound_hausdorff: float = field(init=False)

    def __post_init__(self):
        self.bound_naive = float(bound_naive(self.alpha))
        self.bound_refined = float(bound_refined(self.alpha))
        self.bound_hausdorff = float(bound_hausdorff(self.alpha))


def estimate_dimension(obj, scales, alpha: float, period: float = 1.0) -> DimensionEstimate:
    counts = [(r, box_count(obj, r, period)) for r in scales]
    usable = [(r, n) for r, n in counts if n >= 1]
    fit = fit_dimension(usable)
    return DimensionEstimate(counts, fit.slope, fit.residual, alpha)
