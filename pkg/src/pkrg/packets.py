"""Cubes, smooth cutoffs and localized energy packets.

A ``j``-cube has side ``2**(-j*(1-eps))``.  Its cutoff is a tensor product of
one-dimensional profiles equal to 1 on the cube and vanishing outside the
concentric cube of side ``7/6`` times larger, glued with the same smooth step
used for the Littlewood-Paley symbols.  Everything is periodic on the torus.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, PreconditionError, ResolutionError
from .littlewood_paley import (band_physical, band_symbol, check_band,
                               check_resolved, lp_norm, single, smooth_step,
                               tilde)
from .spectral_field import (FrequencyGrid, SpectralField, irfft3, random_field,
                             rfft3)

SUPPORT_FACTOR = 7.0 / 6.0
MIN_CELLS = 8


def epsilon_bound(alpha: float) -> float:
    """Upper end of the admissible range ``(0, min((4 alpha - 4)/3, 1/20))``."""
    return min((4.0 * alpha - 4.0) / 3.0, 1.0 / 20.0)


def check_epsilon(alpha: float, epsilon: float) -> None:
    hi = epsilon_bound(alpha)
    if not (0.0 < epsilon < hi):
        raise DomainError(f"epsilon={epsilon} outside (0, {hi:.6g}) for alpha={alpha}")


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube on the torus.

    Parameters
    ----------
    center : tuple of float
    j : int
        Level; the side is ``scale * 2**(-j*(1-epsilon))``.
    epsilon : float
    scale : float
        Dilation factor relative to a plain ``j``-cube (``3Q/2`` has scale 1.5).
    """

    center: tuple
    j: int
    epsilon: float = 0.01
    scale: float = 1.0

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 3:
            raise DomainError("cube center must have three coordinates")
        object.__setattr__(self, "center", c)
        if not (0.0 < self.epsilon < 0.05):
            raise DomainError(f"epsilon must lie in (0, 1/20), got {self.epsilon}")
        if not self.scale > 0:
            raise DomainError("scale must be positive")

    @property
    def side(self) -> float:
        return self.scale * 2.0 ** (-self.j * (1.0 - self.epsilon))

    @property
    def half_side(self) -> float:
        return 0.5 * self.side

    def dilate(self, a: float) -> "Cube":
        """``aQ``: same center, ``a`` times the side."""
        return Cube(self.center, self.j, self.epsilon, self.scale * a)

    def ancestor(self, k: int) -> "Cube":
        """``Q_k = 2**((j-k)(1-eps)) Q``, a concentric ``k``-cube."""
        return Cube(self.center, k, self.epsilon, self.scale)

    def contains(self, points, period: float = 1.0, closed: bool = True) -> np.ndarray:
        """Periodic membership test for an ``(m, 3)`` array of points."""
        d = chebyshev_distance(points, self.center, period)
        return d <= self.half_side if closed else d < self.half_side

    def key(self):
        return (self.center, self.j, self.epsilon, self.scale)


def periodic_delta(a, b, period: float) -> np.ndarray:
    """Componentwise signed displacement ``a - b`` wrapped into ``[-L/2, L/2)``."""
    d = np.asarray(a, float) - np.asarray(b, float)
    return (d + 0.5 * period) % period - 0.5 * period


def chebyshev_distance(a, b, period: float) -> np.ndarray:
    return np.max(np.abs(periodic_delta(a, b, period)), axis=-1)


def profile_1d(dist, half_side: float, transition: float):
    """One-dimensional cutoff as a function of the distance to the center."""
    return smooth_step(1.0 + (np.abs(dist) - half_side) / transition)


def _derivative_constants(half_side: float, transition: float, refine: int = 4096):
    """``max |phi^(k)| * side**k`` for k = 1, 2, 3 by finite differences."""
    side = 2 * half_side
    x = np.linspace(0.0, half_side + 2 * transition, refine)
    h = x[1] - x[0]
    y = profile_1d(x, half_side, transition)
    out = []
    for k in (1, 2, 3):
        y = np.gradient(y, h)
        out.append(float(np.max(np.abs(y[5:-5]))) * side**k)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class Cutoff:
    """Sampled cutoff ``phi_Q`` together with its measured derivative constants.

    ``constants[k-1]`` is ``C_k`` with ``max |d^k phi / dx_i^k| <= C_k side**-k``.
    ``saturated`` marks cubes whose support would wrap around the torus, for
    which ``phi`` is identically 1.
    """

    cube: Cube
    grid: FrequencyGrid
    samples: np.ndarray
    constants: tuple
    saturated: bool

    def evaluate(self, points) -> np.ndarray:
        """Continuous evaluation at arbitrary ``(m, 3)`` points."""
        pts = np.atleast_2d(np.asarray(points, float))
        if self.saturated:
            return np.ones(len(pts))
        d = np.abs(periodic_delta(pts, self.cube.center, self.grid.period))
        hs, tr = self.cube.half_side, self.cube.side / 12.0
        return np.prod(profile_1d(d, hs, tr), axis=-1)


def _axis_profile(grid: FrequencyGrid, c: float, half_side: float, transition: float):
    x = grid.axis_points()
    d = periodic_delta(x, c, grid.period)
    return profile_1d(d, half_side, transition)


def bump_samples(grid: FrequencyGrid, center, half_side: float, transition: float) -> np.ndarray:
    """Tensor cutoff: 1 within ``half_side`` of ``center``, 0 beyond ``half_side + transition``."""
    px, py, pz = (_axis_profile(grid, c, half_side, transition) for c in center)
    return px[:, None, None] * py[None, :, None] * pz[None, None, :]


@lru_cache(maxsize=256)
def _cutoff_cached(key, n: int, period: float) -> Cutoff:
    cube = Cube(*key)
    grid = FrequencyGrid(n, period)
    side = cube.side
    if SUPPORT_FACTOR * side >= period:
        s = np.ones(grid.shape)
        s.setflags(write=False)
        return Cutoff(cube, grid, s, (0.0, 0.0, 0.0), True)
    if side < MIN_CELLS * grid.spacing:
        raise ResolutionError(f"cube side {side:.4g} is below {MIN_CELLS} grid cells "
                              f"({MIN_CELLS * grid.spacing:.4g})")
    hs, tr = 0.5 * side, side / 12.0
    s = bump_samples(grid, cube.center, hs, tr)
    s.setflags(write=False)
    return Cutoff(cube, grid, s, _derivative_constants(hs, tr), False)


def make_cutoff(q: Cube, grid: FrequencyGrid) -> Cutoff:
    """Cutoff equal to 1 on ``q`` and supported in ``7q/6``.

    Raises
    ------
    ResolutionError
        If the side spans fewer than eight grid cells.
    """
    return _cutoff_cached(q.key(), grid.n, grid.period)


def torus_cutoff(grid: FrequencyGrid) -> Cutoff:
    """``phi = 1`` everywhere (a cube containing the whole torus)."""
    s = np.ones(grid.shape)
    s.setflags(write=False)
    cube = Cube((0.5 * grid.period,) * 3, 0, 0.01, 2.0 * grid.period)
    return Cutoff(cube, grid, s, (0.0, 0.0, 0.0), True)


def _weighted_norm(samples: np.ndarray, weight: np.ndarray, cell_volume: float) -> float:
    return float(np.sqrt(cell_volume * np.sum(weight**2 * np.sum(samples**2, axis=0))))


def packet_norm(u: SpectralField, q: Cube | Cutoff, j: int) -> float:
    """``u_{Q,j} = ||phi_Q P_j u||``.

    Raises
    ------
    BandRangeError
        If ``j`` is not a resolved band.
    """
    check_resolved(u.grid, j)
    phi = q if isinstance(q, Cutoff) else make_cutoff(q, u.grid)
    return _weighted_norm(band_physical(u, j), phi.samples, u.grid.cell_volume)


def window_samples(u: SpectralField, lo: int, hi: int) -> np.ndarray:
    """Physical samples of ``sum_{k=lo}^{hi} P_k u``."""
    from .littlewood_paley import band_window, project_half
    return irfft3(project_half(u.half, u.grid, band_window(lo, hi)), u.grid.n)


class PacketEvaluator:
    """Cache of band samples for one field, for many ``(cube, band)`` queries.

    Bands outside the lattice range contribute zero; callers decide whether
    that clipping matters.
    """

    def __init__(self, u: SpectralField):
        from .littlewood_paley import lattice_band_range
        self.u = u
        self.grid = u.grid
        self.range = lattice_band_range(u.grid)
        self._bands = {}
        self._windows = {}

    def band(self, k: int) -> np.ndarray | None:
        lo, hi = self.range
        if k < lo or k > hi:
            return None
        if k not in self._bands:
            self._bands[k] = band_physical(self.u, k)
        return self._bands[k]

    def window(self, lo: int, hi: int) -> np.ndarray | None:
        blo, bhi = self.range
        lo, hi = max(lo, blo), min(hi, bhi)
        if lo > hi:
            return None
        key = (lo, hi)
        if key not in self._windows:
            acc = None
            for k in range(lo, hi + 1):
                b = self.band(k)
                acc = b.copy() if acc is None else acc + b
            self._windows[key] = acc
        return self._windows[key]

    def norm(self, q: Cube | Cutoff, lo: int, hi: int | None = None) -> float:
        """``||phi_Q sum_{k=lo}^{hi} P_k u||`` (``hi`` defaults to ``lo``)."""
        hi = lo if hi is None else hi
        s = self.window(lo, hi)
        if s is None:
            return 0.0
        phi = q if isinstance(q, Cutoff) else make_cutoff(q, self.grid)
        return _weighted_norm(s, phi.samples, self.grid.cell_volume)


@dataclass
class PacketSeries:
    """Time series of ``u_{Q,j}`` for one cube and band."""

    cube: Cube
    j: int
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.values = np.asarray(self.values, float)
        if self.times.shape != self.values.shape:
            raise DomainError("times and values must have equal length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise DomainError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise DomainError("packet values must be finite and nonnegative")


def packet_series(snapshots, q: Cube, j: int) -> PacketSeries:
    """Build a :class:`PacketSeries` from ``(time, field)`` pairs."""
    times, values = [], []
    for t, u in snapshots:
        times.append(t)
        values.append(packet_norm(u, q, j))
    return PacketSeries(q, j, np.array(times), np.array(values))


def lattice_cubes(grid: FrequencyGrid, j: int, epsilon: float) -> list:
    """Axis-aligned ``j``-cubes covering the torus, anchored at the origin.

    The per-axis count is ``ceil(L / side)``, so neighbouring cubes overlap
    slightly when the side does not divide the period.
    """
    side = 2.0 ** (-j * (1.0 - epsilon))
    m = max(1, math.ceil(grid.period / side - 1e-12))
    step = grid.period / m
    c = (np.arange(m) + 0.5) * step
    return [Cube((a, b, d), j, epsilon) for a in c for b in c for d in c]


# ----------------------------------------------------------------------------
# moving bumps across projections
# ----------------------------------------------------------------------------

@dataclass
class SeparationTest:
    """Geometry and sampling for :func:`bump_move_error`.

    Two cubes of side ``side`` are centred half a period apart along the first
    axis, so their cutoff supports are separated by ``period/2 - 7 side/6`` in
    both periodic directions.

    Attributes
    ----------
    n, period : int, float
        Grid for the measurement.  A period of 1/2 makes bands up to 6 resolved
        on 128 points.
    js : tuple of int
    side : float or None
        Cube side; ``None`` picks ``0.192 * period``.
    transition : float or None
        Width of the smooth collar; ``None`` uses ``side / 12`` as for cube
        cutoffs.  The support then has half-width ``side/2 + transition``.
    seed : int
        Seed of the white-noise test field.
    slope_threshold : float
        Required decay: fitted slope of ``log2(error)`` against ``j`` must be
        at most ``-slope_threshold``.
    zero_second : bool
        Replace the second cutoff by 0 (the trivial case).
    """

    n: int = 128
    period: float = 0.5
    js: tuple = (3, 4, 5, 6)
    side: float | None = None
    transition: float | None = None
    seed: int = 0
    slope_threshold: float = 6.0
    zero_second: bool = False

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.n, self.period)

    @property
    def cube_side(self) -> float:
        return 0.192 * self.period if self.side is None else self.side

    @property
    def collar(self) -> float:
        return self.cube_side / 12.0 if self.transition is None else self.transition

    @property
    def separation(self) -> float:
        return 0.5 * self.period - self.cube_side - 2.0 * self.collar


@dataclass
class DecayReport:
    """Measured errors per band and their fitted decay slopes."""

    js: tuple
    separation: float
    errors: dict
    slopes: dict
    threshold: float
    passed: dict = field(default_factory=dict)

    def ok(self) -> bool:
        return all(self.passed.values())


def fit_log2_slope(js, errors) -> float:
    """Least-squares slope of ``log2(error)`` against ``j``; ``-inf`` if all errors vanish."""
    e = np.asarray(errors, float)
    if np.all(e == 0):
        return -math.inf
    y = np.log2(np.maximum(e, np.finfo(float).tiny))
    return float(np.polyfit(np.asarray(js, float), y, 1)[0])


def _project_samples(samples: np.ndarray, grid: FrequencyGrid, band) -> np.ndarray:
    half = rfft3(samples) * band_symbol(grid, band)
    return irfft3(half, grid.n)


def bump_move_error(cfg: SeparationTest | None = None) -> DecayReport:
    """Measure how fast projections decouple separated cutoffs.

    For each ``j`` in ``cfg.js`` and a seeded random field ``f`` records

    * ``separated``: ``||phi_1 P_j (phi_2 f)|| / ||f||``
    * ``commutator``: ``||(1 - P~_j)(phi_1 P_j f)|| / ||f||``
    * ``inside``: ``||P_j (phi_1 (1 - P~_j) f)|| / ||f||``

    Raises
    ------
    PreconditionError
        If the cutoff supports are not separated by more than ``2**-j`` for
        every tested ``j``.
    """
    cfg = SeparationTest() if cfg is None else cfg
    grid = cfg.grid
    d = cfg.separation
    for j in cfg.js:
        if not d > 2.0 ** (-j):
            raise PreconditionError(f"separation {d:.4g} must exceed 2^-{j} = {2.0 ** -j:.4g}")
        check_resolved(grid, j)
        check_band(grid, j - 2)
        check_band(grid, j + 2)
    hs, tr = 0.5 * cfg.cube_side, cfg.collar
    if 2 * hs < MIN_CELLS * grid.spacing:
        raise ResolutionError("separation-test cubes are below eight grid cells")
    L = grid.period
    phi1 = bump_samples(grid, (0.25 * L, 0.5 * L, 0.5 * L), hs, tr)
    phi2 = bump_samples(grid, (0.75 * L, 0.5 * L, 0.5 * L), hs, tr)
    if cfg.zero_second:
        phi2 = np.zeros(grid.shape)
    f = random_field(grid, np.random.default_rng(cfg.seed))
    fs = irfft3(f.half, grid.n)
    fn = lp_norm(fs, 2, grid.cell_volume)
    cv = grid.cell_volume
    errors = {"separated": [], "commutator": [], "inside": []}
    for j in cfg.js:
        pj = _project_samples(phi2 * fs, grid, single(j))
        errors["separated"].append(lp_norm(phi1 * pj, 2, cv) / fn)
        v = phi1 * _project_samples(fs, grid, single(j))
        errors["commutator"].append(lp_norm(v - _project_samples(v, grid, tilde(j)), 2, cv) / fn)
        w = phi1 * (fs - _project_samples(fs, grid, tilde(j)))
        errors["inside"].append(lp_norm(_project_samples(w, grid, single(j)), 2, cv) / fn)
    slopes = {k: fit_log2_slope(cfg.js, v) for k, v in errors.items()}
    passed = {k: s <= -cfg.slope_threshold for k, s in slopes.items()}
    return DecayReport(tuple(cfg.js), d, errors, slopes, cfg.slope_threshold, passed)


def localized_bernstein_ratio(u: SpectralField, q: Cube, j: int, quota: float = 1.0) -> float:
    """``||phi_Q P_j u||_inf / (2**(3j/2) u_{Q,j} + quota * err)``.

    ``err`` is the measured sup norm of the part of ``phi_Q P_j u`` lying
    outside the widened band ``P~_j``; it stands in for the negligible error
    term.  Returns 0 when the numerator vanishes.

    Raises
    ------
    PreconditionError
        If the side of ``q`` is not larger than ``2**-j``.
    """
    if not q.side > 2.0 ** (-j):
        raise PreconditionError(f"cube side {q.side:.4g} must exceed 2^-{j}")
    grid = u.grid
    check_resolved(grid, j)
    phi = make_cutoff(q, grid).samples
    v = phi * band_physical(u, j)
    top = lp_norm(v, math.inf, grid.cell_volume)
    if top == 0.0:
        return 0.0
    err = lp_norm(v - _project_samples(v, grid, tilde(j)), math.inf, grid.cell_volume)
    packet = lp_norm(v, 2, grid.cell_volume)
    return top / (2.0 ** (1.5 * j) * packet + quota * err)
