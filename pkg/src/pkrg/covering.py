"""Good and bad cubes, and the cover constructions built on them.

Families of same-level cubes are stored as center arrays.  Distances are
periodic sup-norm distances; neighbour queries go through
:class:`scipy.spatial.cKDTree` with ``p = inf`` and a periodic ``boxsize``.

Open cubes ``Q(x, a)`` and ``Q(y, b)`` (half sides ``a`` and ``b``) meet iff
``|x - y|_inf < a + b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import BarrierNotFoundError, DomainError
from .littlewood_paley import lattice_band_range, project_half, single
from .packets import Cube, periodic_delta
from .spectral_field import irfft3

BARRIER_RMAX = 2.0**-10
PROVENANCES = ("A_j", "B_jk", "B_j", "C_j", "bad", "synthetic")


def side_of(j: int, epsilon: float) -> float:
    return 2.0 ** (-j * (1.0 - epsilon))


def goodness_threshold(j: int, alpha: float, epsilon: float) -> float:
    """``2**(-j (5 - 4 alpha + eps))``."""
    return 2.0 ** (-j * (5.0 - 4.0 * alpha + epsilon))


# ----------------------------------------------------------------------------
# families
# ----------------------------------------------------------------------------

@dataclass
class CoverFamily:
    """Same-level cubes with their provenance.

    Attributes
    ----------
    j : int
    epsilon : float
    centers : ndarray, shape (m, 3)
    provenance : str
        One of ``A_j``, ``B_jk``, ``B_j``, ``C_j`` (``k`` stored separately).
    budget : float
        Reference count the cardinality is compared against.
    period : float
    k : int or None
        Source level for ``B_jk`` families.
    """

    j: int
    epsilon: float
    centers: np.ndarray
    provenance: str
    budget: float = math.nan
    period: float = 1.0
    k: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, float).reshape(-1, 3) % self.period

    def __len__(self):
        return len(self.centers)

    @property
    def side(self) -> float:
        return side_of(self.j, self.epsilon)

    @property
    def half_side(self) -> float:
        return 0.5 * self.side

    @property
    def measured_c(self) -> float:
        return len(self) / self.budget if self.budget and self.budget > 0 else math.nan

    def cubes(self) -> list:
        return [Cube(tuple(c), self.j, self.epsilon) for c in self.centers]

    def tree(self) -> cKDTree:
        return _tree(self.centers, self.period)

    def covers(self, points, closed: bool = True) -> np.ndarray:
        """Membership of ``(m, 3)`` points in the union of the family."""
        pts = np.asarray(points, float).reshape(-1, 3) % self.period
        if len(self) == 0:
            return np.zeros(len(pts), bool)
        d, _ = self.tree().query(pts, k=1, p=np.inf)
        h = self.half_side
        return d <= h * (1 + 1e-12) if closed else d < h


def _tree(centers: np.ndarray, period: float) -> cKDTree:
    c = np.asarray(centers, float).reshape(-1, 3) % period
    c[c >= period] = 0.0
    return cKDTree(c, boxsize=period)


def family_from_cubes(cubes, provenance: str, period: float = 1.0) -> CoverFamily:
    cubes = list(cubes)
    if not cubes:
        raise DomainError("cannot infer level from an empty cube list")
    js = {q.j for q in cubes}
    eps = {q.epsilon for q in cubes}
    scales = {q.scale for q in cubes}
    if len(js) != 1 or len(eps) != 1 or scales != {1.0}:
        raise DomainError("cubes must share one level, one epsilon and unit scale")
    return CoverFamily(js.pop(), eps.pop(), np.array([q.center for q in cubes]), provenance,
                       period=period)


def unique_centers(centers: np.ndarray, period: float, tol: float = 1e-9) -> np.ndarray:
    if len(centers) == 0:
        return np.zeros((0, 3))
    c = np.mod(centers, period)
    key = np.round(c / tol).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return c[np.sort(idx)]


def retile(centers: np.ndarray, factor: float, side: float, period: float) -> np.ndarray:
    """Centers of ``ceil(factor)**3`` cubes of side ``side`` covering each ``factor``-dilate."""
    m = max(1, math.ceil(factor - 1e-12))
    offs = (np.arange(m) - 0.5 * (m - 1)) * side
    grid = np.stack(np.meshgrid(offs, offs, offs, indexing="ij"), -1).reshape(-1, 3)
    out = (np.asarray(centers, float)[:, None, :] + grid[None, :, :]).reshape(-1, 3)
    return unique_centers(out, period)


def lattice_centers(j: int, epsilon: float, period: float = 1.0) -> np.ndarray:
    """Centers of the origin-anchored tiling by ``j``-cubes (overlapping when the side does not divide the period)."""
    s = side_of(j, epsilon)
    m = max(1, math.ceil(period / s - 1e-12))
    c = (np.arange(m) + 0.5) * (period / m)
    return np.stack(np.meshgrid(c, c, c, indexing="ij"), -1).reshape(-1, 3)


# ----------------------------------------------------------------------------
# classification
# ----------------------------------------------------------------------------

@dataclass
class GoodnessRecord:
    cube: Cube
    integral: float
    threshold: float
    window: tuple
    verdict: str


def verdict(integral: float, threshold: float) -> str:
    return "good" if integral <= threshold else "bad"


def _axis_membership(points: np.ndarray, centers: np.ndarray, half: float, period: float) -> np.ndarray:
    d = np.abs(periodic_delta(points[None, :], centers[:, None], period))
    return (d <= half).astype(float)


def high_dissipation_density(half: np.ndarray, grid, j: int, alpha: float) -> np.ndarray:
    """Pointwise ``sum_{k >= j} 2**(2 alpha k) |P_k u|**2`` (bands above the lattice vanish)."""
    _, top = lattice_band_range(grid)
    dens = np.zeros(grid.shape)
    for k in range(j, top + 1):
        pk = irfft3(project_half(half, grid, single(k)), grid.n)
        dens += 2.0 ** (2 * alpha * k) * np.sum(pk * pk, axis=0)
    return dens


def classify(trajectory, j: int, window, alpha: float | None = None, epsilon: float = 0.01):
    """Good/bad verdict for every cube of the ``j``-lattice over a time window.

    The space integral sums grid points inside the closed cube; the time
    integral is the trapezoid rule over the snapshots inside ``window``.

    Parameters
    ----------
    trajectory : Trajectory or sequence of (time, SpectralField)
    window : (float, float)

    Raises
    ------
    DomainError
        If fewer than one snapshot lies inside the window or it is empty.
    """
    t0, t1 = map(float, window)
    if not t1 > t0:
        raise DomainError(f"empty analysis window {window}")
    pairs = trajectory.snapshot_pairs() if hasattr(trajectory, "snapshot_pairs") else list(trajectory)
    if alpha is None:
        alpha = trajectory.config.alpha
    inside = [(t, u) for t, u in pairs if t0 - 1e-12 <= t <= t1 + 1e-12]
    if not inside:
        raise DomainError("no snapshot inside the analysis window")
    grid = inside[0][1].grid
    centers = lattice_centers(j, epsilon, grid.period)
    axis = np.unique(centers[:, 0])
    m = len(axis)
    M = _axis_membership(grid.axis_points(), axis, 0.5 * side_of(j, epsilon), grid.period)
    vals = []
    for _, u in inside:
        dens = high_dissipation_density(u.half, grid, j, alpha)
        vals.append(np.einsum("ai,bj,ck,ijk->abc", M, M, M, dens, optimize=True) * grid.cell_volume)
    times = np.array([t for t, _ in inside])
    if len(vals) == 1:
        integ = vals[0] * 0.0
    else:
        trap = getattr(np, "trapezoid", None) or np.trapz
        integ = trap(np.stack(vals), times, axis=0)
    thr = goodness_threshold(j, alpha, epsilon)
    recs = []
    for a in range(m):
        for b in range(m):
            for c in range(m):
                q = Cube((axis[a], axis[b], axis[c]), j, epsilon)
                val = float(integ[a, b, c])
                recs.append(GoodnessRecord(q, val, thr, (t0, t1), verdict(val, thr)))
    return recs


# ----------------------------------------------------------------------------
# Vitali cover
# ----------------------------------------------------------------------------

def greedy_disjoint(centers: np.ndarray, exclusion: float, period: float, order=None) -> np.ndarray:
    """Indices picked greedily so every later pick is at sup distance ``>= exclusion`` from earlier ones.

    Candidates are visited in ``order``; each pick blocks every candidate
    strictly closer than ``exclusion``.
    """
    n = len(centers)
    if n == 0:
        return np.zeros(0, int)
    order = np.arange(n) if order is None else np.asarray(order)
    tree = _tree(centers, period)
    pts = np.asarray(centers, float) % period
    blocked = np.zeros(n, bool)
    picked = []
    r = exclusion * (1.0 - 1e-12)
    for i in order:
        if blocked[i]:
            continue
        picked.append(i)
        blocked[tree.query_ball_point(pts[i], r, p=np.inf)] = True
    return np.array(picked, int)


def vitali_cover(bad, j: int | None = None, epsilon: float | None = None, period: float = 1.0,
                 alpha: float | None = None) -> CoverFamily:
    """Greedy disjoint kernel of bad ``j``-cubes, each ``5Q`` re-tiled by ``5**3`` cubes.

    ``bad`` is a list of :class:`Cube` or a :class:`CoverFamily`.  The kernel
    indices are stored in ``meta["kernel"]`` and the kernel size in
    ``meta["kernel_size"]``.

    Raises
    ------
    DomainError
        If the cubes are not all at level ``j``.
    """
    if isinstance(bad, CoverFamily):
        fam = bad
    else:
        bad = list(bad)
        if not bad:
            return CoverFamily(j if j is not None else 0, epsilon or 0.01, np.zeros((0, 3)), "A_j",
                               period=period, meta={"kernel": np.zeros(0, int), "kernel_size": 0})
        fam = family_from_cubes(bad, "bad", period)
    if j is not None and fam.j != j:
        raise DomainError(f"cubes at level {fam.j} passed for level {j}")
    s = fam.side
    kernel = greedy_disjoint(fam.centers, s, fam.period)
    centers = retile(fam.centers[kernel], 5.0, s, fam.period)
    budget = 2.0 ** (fam.j * (5.0 - 4.0 * alpha + fam.epsilon)) if alpha is not None else math.nan
    return CoverFamily(fam.j, fam.epsilon, centers, "A_j", budget, fam.period,
                       meta={"kernel": kernel, "kernel_size": int(len(kernel))})


# ----------------------------------------------------------------------------
# naughty cubes and B_j
# ----------------------------------------------------------------------------

def naughty_threshold(j: int, k: int, alpha: float, epsilon: float, eta: float) -> float:
    """``eta * 2**((k - j)(5 - 4 alpha + 2 eps))``."""
    return eta * 2.0 ** ((k - j) * (5.0 - 4.0 * alpha + 2.0 * epsilon))


def intersection_counts(candidates: np.ndarray, a: float, fam: CoverFamily) -> np.ndarray:
    """Number of ``fam`` cubes meeting each open candidate cube of half side ``a``."""
    if len(fam) == 0 or len(candidates) == 0:
        return np.zeros(len(candidates), int)
    r = (a + fam.half_side) * (1.0 - 1e-12)
    pts = np.asarray(candidates, float) % fam.period
    pts[pts >= fam.period] = 0.0
    return np.asarray(fam.tree().query_ball_point(pts, r, p=np.inf, return_length=True), int)


def naughty_candidates(all_covers: dict, j: int, k: int, extra=None) -> np.ndarray:
    """Candidate ``j``-cube centers for the ``k``-naughty search.

    A ``j``-cube meets an element of ``A_k`` only if its center lies within
    ``a + b`` of that element; candidates are placed at the element centers
    and at the 26 sup-norm offsets of size ``a`` around them, plus ``extra``.
    """
    fam = all_covers[k]
    pts = [fam.centers]
    if len(fam):
        a = 0.5 * side_of(j, fam.epsilon)
        offs = np.array([[dx, dy, dz] for dx in (-1, 0, 1) for dy in (-1, 0, 1)
                         for dz in (-1, 0, 1) if (dx, dy, dz) != (0, 0, 0)], float) * a
        pts.append((fam.centers[:, None, :] + offs[None]).reshape(-1, 3))
    if extra is not None and len(extra):
        pts.append(np.asarray(extra, float))
    return unique_centers(np.concatenate(pts), fam.period) if pts else np.zeros((0, 3))


def naughty_cover(all_covers: dict, j: int, eta: float, alpha: float, epsilon: float | None = None,
                  extra_candidates=None, period: float | None = None):
    """Build ``B_{j,k}`` for every available ``k >= j`` and the barrier-ready ``B_j``.

    Parameters
    ----------
    all_covers : dict
        ``k -> CoverFamily`` (the ``A_k`` families).
    eta : float
        In ``(0, 1)``.
    extra_candidates : array, optional
        Additional ``j``-cube centers to test (the bad ``j``-cubes, say).

    Returns
    -------
    (CoverFamily, dict)
        ``B_j`` after the final ``3Q`` expansion, and ``k -> B_{j,k}``.
    """
    if not (0.0 < eta < 1.0):
        raise DomainError(f"eta must lie in (0, 1), got {eta}")
    ks = sorted(k for k in all_covers if k >= j)
    if epsilon is None:
        epsilon = all_covers[ks[0]].epsilon if ks else 0.01
    if period is None:
        period = all_covers[ks[0]].period if ks else 1.0
    s = side_of(j, epsilon)
    a = 0.5 * s
    beta = 5.0 - 4.0 * alpha + epsilon
    bjk = {}
    union = []
    for k in ks:
        fam = all_covers[k]
        cand = naughty_candidates(all_covers, j, k, extra_candidates)
        counts = intersection_counts(cand, a, fam)
        thr = naughty_threshold(j, k, alpha, epsilon, eta)
        nz = np.nonzero(counts > thr)[0]
        order = nz[np.lexsort((nz, -counts[nz]))]
        picks = greedy_disjoint(cand, 4 * a, period, order) if len(order) else np.zeros(0, int)
        centers = retile(cand[picks], 3.0, s, period) if len(picks) else np.zeros((0, 3))
        budget = (1.0 / eta) * 2.0 ** (j * beta) * 2.0 ** (epsilon * (j - k))
        limit = len(fam) / thr if thr > 0 else math.inf
        bjk[k] = CoverFamily(j, epsilon, centers, "B_jk", budget, period, k,
                             meta={"picks": int(len(picks)), "pick_limit": limit,
                                   "naughty_candidates": int(len(nz)), "threshold": thr})
        union.append(centers)
    allc = unique_centers(np.concatenate(union), period) if union else np.zeros((0, 3))
    final = retile(allc, 3.0, s, period) if len(allc) else np.zeros((0, 3))
    budget = (1.0 / eta) * 2.0 ** (j * beta)
    bj = CoverFamily(j, epsilon, final, "B_j", budget, period,
                     meta={"before_expansion": int(len(allc))})
    return bj, bjk


# ----------------------------------------------------------------------------
# surface intervals and barrier search
# ----------------------------------------------------------------------------

def geometric_interval(outer_center, a: float, inner_center, b: float, period: float | None = None):
    """Interval of ``r`` for which ``boundary(r Q)`` may meet ``Q'``.

    ``Q = Q(y, 2a)`` is the outer cube and ``Q' = Q'(x, 2b)`` the inner one.
    Returns ``(r_lo, r_hi) = (max(0, r' - b/a), r' + b/a)`` with
    ``r' = |x - y|_inf / a`` (``r' = 0`` for concentric cubes).
    """
    y = np.asarray(outer_center, float)
    x = np.asarray(inner_center, float)
    delta = periodic_delta(x, y, period) if period else x - y
    rq = float(np.max(np.abs(delta))) / a
    g = b / a
    return max(0.0, rq - g), rq + g


def surface_meets_cube(x, a_r: float, y, b: float, period: float | None = None) -> bool:
    """Exact test: does the boundary of ``Q(x)`` with half side ``a_r`` meet the open cube ``Q(y, 2b)``?"""
    delta = periodic_delta(y, x, period) if period else np.asarray(y, float) - np.asarray(x, float)
    dist = float(np.max(np.abs(delta)))
    return max(0.0, dist - b) < a_r < dist + b


def surface_sampling_hits(y, a: float, x, b: float, rs, per_face: int = 9) -> np.ndarray:
    """Brute-force oracle: for each ``r`` in ``rs`` whether sampled points of ``boundary(r Q(y))`` fall in ``Q'(x)``.

    Each face is sampled on a ``per_face x per_face`` grid together with the
    point of the face nearest to ``x`` (non-periodic geometry).
    """
    y = np.asarray(y, float)
    x = np.asarray(x, float)
    h = np.asarray(rs, float)[:, None, None] * a
    t = np.linspace(-1.0, 1.0, per_face)
    U, V = np.meshgrid(t, t, indexing="ij")
    U, V = U.ravel(), V.ravel()
    m = len(U) + 1
    hits = np.zeros(h.shape[0], bool)
    for axis in range(3):
        o = [ax for ax in range(3) if ax != axis]
        for sign in (-1.0, 1.0):
            p = np.empty((h.shape[0], m, 3))
            p[:, :-1, axis] = y[axis] + sign * h[:, :, 0]
            p[:, :-1, o[0]] = y[o[0]] + h[:, :, 0] * U
            p[:, :-1, o[1]] = y[o[1]] + h[:, :, 0] * V
            p[:, -1, axis] = y[axis] + sign * h[:, 0, 0]
            p[:, -1, o] = np.clip(x[o], y[o] - h[:, 0], y[o] + h[:, 0])
            hits |= np.any(np.max(np.abs(p - x), axis=2) < b, axis=1)
    return hits


@dataclass
class BarrierResult:
    """Outcome of a barrier search around ``center``.

    ``r`` multiplies the side of the ``j1``-cube at ``center``; the barrier
    surface is the boundary of that scaled cube.  ``f_grid`` and ``f_values``
    sample the intersection-count function on ``(0, 2**-10)``.
    """

    center: tuple
    j1: int
    r: float
    epsilon: float
    f_grid: np.ndarray
    f_values: np.ndarray
    f_l1: float
    intervals: int
    verified: bool


def barrier_half_side(b: BarrierResult) -> float:
    return 0.5 * b.r * side_of(b.j1, b.epsilon)


def _collect_intervals(x, a: float, covers: dict, j1: int, period: float, rmax: float):
    """Clipped intervals ``[lo, hi]`` from every cube within reach of radii below ``rmax``."""
    ivs = []
    for k, fam in covers.items():
        if k < j1 or len(fam) == 0:
            continue
        b = fam.half_side
        reach = rmax * a + b
        pt = np.asarray(x, float) % period
        pt[pt >= period] = 0.0
        idx = fam.tree().query_ball_point(pt, reach, p=np.inf)
        for i in idx:
            lo, hi = geometric_interval(x, a, fam.centers[i], b, period)
            if lo < rmax and hi > 0:
                ivs.append((max(lo, 0.0), min(hi, rmax)))
    return ivs


def _f_on(rs, ivs):
    vals = np.zeros(len(rs), int)
    for lo, hi in ivs:
        vals += (rs >= lo) & (rs <= hi)
    return vals


def barrier_search(x, j1: int, covers: dict, epsilon: float = 0.01, period: float = 1.0,
                   samples: int = 257) -> BarrierResult:
    """Find ``r`` in ``(0, 2**-10)`` avoided by every interval from :func:`geometric_interval`.

    The sweep runs over sorted interval endpoints and returns the midpoint
    of the widest uncovered gap.  An independent pass then applies the exact
    surface test to every cube of every family at the returned ``r``.

    Raises
    ------
    BarrierNotFoundError
        If the intervals cover all of ``(0, 2**-10)``.
    """
    a = 0.5 * side_of(j1, epsilon)
    rmax = BARRIER_RMAX
    ivs = _collect_intervals(x, a, covers, j1, period, rmax)
    l1 = float(sum(hi - lo for lo, hi in ivs))
    best, best_w = None, 0.0
    cur = 0.0
    for lo, hi in sorted(ivs):
        if lo > cur and lo - cur > best_w:
            best, best_w = 0.5 * (cur + lo), lo - cur
        cur = max(cur, hi)
    if rmax > cur and rmax - cur > best_w:
        best, best_w = 0.5 * (cur + rmax), rmax - cur
    rs = np.linspace(0.0, rmax, samples)[1:-1]
    fv = _f_on(rs, ivs)
    if best is None:
        raise BarrierNotFoundError(f"no barrier radius around {tuple(np.round(x, 6))} at level {j1}", l1)
    verified = verify_barrier(x, j1, best, covers, epsilon, period)
    return BarrierResult(tuple(map(float, x)), j1, float(best), epsilon, rs, fv, l1, len(ivs), verified)


def verify_barrier(x, j1: int, r: float, covers: dict, epsilon: float, period: float) -> bool:
    """Brute-force recheck: no cube of any level ``>= j1`` meets the barrier surface."""
    ar = 0.5 * r * side_of(j1, epsilon)
    xx = np.asarray(x, float)
    for k, fam in covers.items():
        if k < j1 or len(fam) == 0:
            continue
        d = np.max(np.abs(periodic_delta(fam.centers, xx, period)), axis=1)
        b = fam.half_side
        hit = (np.maximum(0.0, d - b) < ar) & (ar < d + b)
        if np.any(hit):
            return False
    return True


# ----------------------------------------------------------------------------
# refined cover
# ----------------------------------------------------------------------------

def refined_budget(j: int, alpha: float, epsilon: float) -> float:
    """``2**(j (-16 a**2 + 16 a (1+eps) + 5 - 17 eps - 4 eps**2) / 3)``."""
    e = (-16 * alpha**2 + 16 * alpha * (1 + epsilon) + 5 - 17 * epsilon - 4 * epsilon**2) / 3.0
    return 2.0**(j * e)


def refined_cover(covers: dict, j: int, theta: float, alpha: float | None = None,
                  epsilon: float = 0.01, period: float = 1.0) -> CoverFamily:
    """``C_j``: ``j``-cubes covering every element of ``B_k`` for ``floor(theta j - 10) <= k <= j``.

    Levels missing from ``covers`` are recorded in ``meta["missing"]``.
    """
    k_lo = math.floor(theta * j - 10)
    s = side_of(j, epsilon)
    parts, missing = [], []
    for k in range(k_lo, j + 1):
        fam = covers.get(k)
        if fam is None:
            missing.append(k)
            continue
        if len(fam) == 0:
            continue
        factor = fam.side / s
        parts.append(retile(fam.centers, factor, s, period))
    centers = unique_centers(np.concatenate(parts), period) if parts else np.zeros((0, 3))
    budget = refined_budget(j, alpha, epsilon) if alpha is not None else math.nan
    return CoverFamily(j, epsilon, centers, "C_j", budget, period,
                       meta={"k_range": (k_lo, j), "missing": missing})


# ----------------------------------------------------------------------------
# membership oracle
# ----------------------------------------------------------------------------

def cube_sample_points(centers: np.ndarray, half: float, per_axis: int = 5, inset: float = 1e-9) -> np.ndarray:
    """Grid of points filling each closed cube (corners pulled in by ``inset``)."""
    t = np.linspace(-1.0, 1.0, per_axis) * half * (1 - inset)
    g = np.stack(np.meshgrid(t, t, t, indexing="ij"), -1).reshape(-1, 3)
    return (np.asarray(centers, float)[:, None, :] + g[None]).reshape(-1, 3)


def all_covered(cubes: CoverFamily, cover: CoverFamily, per_axis: int = 5) -> bool:
    """Every sample point of every cube of ``cubes`` lies in the union of ``cover``."""
    if len(cubes) == 0:
        return True
    pts = cube_sample_points(cubes.centers, cubes.half_side, per_axis)
    return bool(np.all(cover.covers(pts)))


# ----------------------------------------------------------------------------
# synthetic bad sets
# ----------------------------------------------------------------------------

PLACEMENTS = ("uniform", "clustered", "shell", "planar")


def synthetic_bad(k: int, count: int, placement: str, rng: np.random.Generator, epsilon: float = 0.01,
                  period: float = 1.0, hubs=None, spread: float = 0.02) -> np.ndarray:
    """Centers of ``count`` bad ``k``-cubes in one of the :data:`PLACEMENTS`."""
    if placement == "uniform":
        c = rng.uniform(0, period, (count, 3))
    elif placement == "clustered":
        hubs = np.array([[0.3, 0.3, 0.3], [0.7, 0.6, 0.4]]) * period if hubs is None else np.asarray(hubs)
        which = rng.integers(0, len(hubs), count)
        c = hubs[which] + rng.normal(0.0, spread * period, (count, 3))
    elif placement == "shell":
        v = rng.normal(size=(count, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        c = 0.5 * period + 0.2 * period * v
    elif placement == "planar":
        c = np.column_stack([rng.uniform(0, period, count), rng.uniform(0, period, count),
                             np.full(count, 0.5 * period) + rng.normal(0, 0.002 * period, count)])
    else:
        raise DomainError(f"unknown placement {placement!r}")
    return np.mod(c, period)


@dataclass
class SyntheticSuite:
    """Synthetic ``A_k`` families for levels ``j..k_max`` at a common placement.

    ``count_k = ceil(c_bad * 2**(k (5 - 4 alpha + eps)))`` bad ``k``-cubes are
    drawn; ``A_k`` is their Vitali cover.
    """

    j: int
    k_max: int
    alpha: float = 1.1
    epsilon: float = 0.01
    c_bad: float = 1.0
    placement: str = "clustered"
    seed: int = 0
    period: float = 1.0
    spread: float = 0.02

    def build(self):
        rng = np.random.default_rng(self.seed)
        beta = 5.0 - 4.0 * self.alpha + self.epsilon
        bad, covers = {}, {}
        for k in range(self.j, self.k_max + 1):
            count = int(math.ceil(self.c_bad * 2.0 ** (k * beta)))
            centers = synthetic_bad(k, count, self.placement, rng, self.epsilon, self.period,
                                    spread=self.spread)
            bad[k] = CoverFamily(k, self.epsilon, centers, "bad", period=self.period)
            covers[k] = vitali_cover(bad[k], alpha=self.alpha)
        return bad, covers


def exterior_points(bj: CoverFamily, count: int, rng: np.random.Generator, near=None,
                    near_spread: float = 0.05, max_tries: int = 200) -> np.ndarray:
    """Random points outside ``B_j``; half uniform, half near the ``near`` points when given."""
    period = bj.period
    out = []
    n_near = count // 2 if near is not None and len(near) else 0
    for want, mode in ((count - n_near, "uniform"), (n_near, "near")):
        got = []
        tries = 0
        while sum(len(g) for g in got) < want and tries < max_tries:
            tries += 1
            m = max(64, 4 * want)
            if mode == "uniform":
                p = rng.uniform(0, period, (m, 3))
            else:
                hub = np.asarray(near)[rng.integers(0, len(near), m)]
                p = np.mod(hub + rng.normal(0, near_spread * period, (m, 3)), period)
            p = p[~bj.covers(p, closed=True)]
            got.append(p)
        pts = np.concatenate(got)[:want] if got else np.zeros((0, 3))
        out.append(pts)
    return np.concatenate(out)
