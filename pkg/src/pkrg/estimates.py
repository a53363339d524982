"""Packet-energy flux and the terms bounding it.

For a cube ``Q`` and band ``j`` the packet energy ``u_{Q,j}**2`` evolves by

    d/dt ||phi_Q P_j u||**2 = 2 (I + J)

with ``I = -<(-Delta)^alpha u, P_j(phi_Q**2 P_j u)>`` and
``J = -<T[(u . grad) u], P_j(phi_Q**2 P_j u)>``.  Because ``P_j`` is self
adjoint both are evaluated as grid sums ``sum phi**2 P_j u . P_j(...)``,
which makes the identity exact for the semi-discrete solver.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .littlewood_paley import (lattice_band_range, project_half,
                               resolved_band_range, single)
from .packets import Cube, PacketEvaluator, make_cutoff, torus_cutoff
from .solver import Operators, ifrk4_step
from .spectral_field import SpectralField, irfft3


def theta(alpha: float, epsilon: float) -> float:
    """``2 (2 alpha - 1 - epsilon) / 3``."""
    return 2.0 * (2.0 * alpha - 1.0 - epsilon) / 3.0


class FluxFields:
    """Band samples of ``u``, ``(-Delta)^alpha u`` and the nonlinear term for one state.

    ``ops`` fixes the exponent and dealiasing; the nonlinear term is the one the
    solver integrates (Leray-projected, truncated), so the flux identity holds
    for the discrete dynamics.
    """

    def __init__(self, u: SpectralField, ops: Operators):
        self.u = u
        self.ops = ops
        self.grid = u.grid
        half = u.half * ops.mask
        self._half = half
        self._lap = ops.lam * half
        self._nl = ops.nonlinear(half) if np.any(half) else np.zeros_like(half)
        self._cache = {}

    def band(self, j: int):
        if j not in self._cache:
            g, n = self.grid, self.grid.n
            sel = single(j)
            self._cache[j] = tuple(irfft3(project_half(a, g, sel), n)
                                   for a in (self._half, self._lap, self._nl))
        return self._cache[j]

    def flux(self, weight: np.ndarray, j: int):
        """``(I, J)`` for the squared cutoff ``weight``."""
        pu, pl, pn = self.band(j)
        cv = self.grid.cell_volume
        w = pu * weight
        i_term = -cv * float(np.sum(w * pl))
        j_term = cv * float(np.sum(w * pn))
        return i_term, j_term

    def packet_sq(self, weight: np.ndarray, j: int) -> float:
        pu = self.band(j)[0]
        return self.grid.cell_volume * float(np.sum(weight * pu * pu))


def _cutoff_for(q, grid):
    return torus_cutoff(grid) if q is None else make_cutoff(q, grid)


def flux_identity(u: SpectralField, q: Cube | None, j: int, alpha: float,
                  dealias: str = "two-thirds"):
    """``(I, J)`` for cube ``q`` (``None`` means ``phi = 1``) and band ``j``.

    Raises
    ------
    DomainError
        If ``u`` is not flagged divergence-free.
    """
    if not u.divergence_free:
        raise DomainError("flux identity requires a divergence-free field")
    from .littlewood_paley import check_resolved
    check_resolved(u.grid, j)
    ops = Operators(u.grid, alpha, 1.0, dealias)
    phi = _cutoff_for(q, u.grid).samples
    return FluxFields(u, ops).flux(phi * phi, j)


def probe_rates(half: np.ndarray, ops: Operators, weights: dict, js, h: float | None = None):
    """Richardson-extrapolated ``d/dt u_{Q,j}**2`` from short solver probes.

    Advances ``half`` by ``+-h`` and ``+-2h`` with the integrating-factor
    scheme and combines the central differences as ``(4 D_h - D_2h) / 3``.
    ``h`` defaults to ``0.02 / lambda_max`` so the backward probes stay
    well conditioned.

    Returns
    -------
    dict
        ``(key, j) -> rate`` for every weight key and band.
    """
    h = 0.02 / ops.lam_max if h is None else h
    grid = ops.grid
    states = {}
    for s in (-2, -1, 1, 2):
        states[s] = ifrk4_step(half, ops, dt=s * h)
    bands = {}
    for s, st in states.items():
        for j in js:
            bands[s, j] = irfft3(project_half(st, grid, single(j)), grid.n)
    cv = grid.cell_volume
    out = {}
    for key, w in weights.items():
        for j in js:
            q = {s: cv * float(np.sum(w * np.sum(bands[s, j] ** 2, axis=0))) for s in states}
            d1 = (q[1] - q[-1]) / (2 * h)
            d2 = (q[2] - q[-2]) / (4 * h)
            out[key, j] = (4 * d1 - d2) / 3
    return out


@dataclass
class EstimateTerms:
    """Every quantity entering the packet-energy bound for one ``(time, cube, j)``.

    ``measured_c`` is ``J / (G_low_loc + G_loc + G_hh)`` and ``measured_diss``
    is ``-I / G_diss``; both are data, reported rather than asserted.
    ``clipped`` lists the band windows that extend past the resolved range.
    """

    time: float
    cube_id: int
    j: int
    I: float
    J: float
    G_diss: float
    G_low_loc: float
    G_loc: float
    G_hh: float
    e_diss: float
    e_vl: float
    theta: float
    lhs_rate: float = math.nan
    measured_c: float = math.nan
    measured_diss: float = math.nan
    large_j_waived: bool = False
    clipped: tuple = ()

    def row(self) -> dict:
        d = asdict(self)
        d["clipped"] = ";".join(self.clipped)
        return d


@dataclass
class EstimateConfig:
    alpha: float = 1.1
    epsilon: float = 0.01
    dealias: str = "two-thirds"


def _window_sum(ev: PacketEvaluator, q, lo: int, hi: int) -> float:
    """``sum_{k=lo}^{hi} u_{q,k}`` over bands present on the lattice."""
    blo, bhi = ev.range
    return sum(ev.norm(q, k) for k in range(max(lo, blo), min(hi, bhi) + 1))


def estimate_terms(u: SpectralField, q: Cube, j: int, cfg: EstimateConfig | None = None,
                   time: float = 0.0, cube_id: int = 0, evaluator: PacketEvaluator | None = None,
                   flux: FluxFields | None = None, lhs_rate: float = math.nan) -> EstimateTerms:
    """Evaluate the flux and all bounding terms with unit constants.

    Windows ``j +- 2`` and ``j +- 4`` are sums of packet norms over the
    listed bands; the low sum runs over integers ``theta j <= k <= j - 5``
    on the ancestors ``Q_k`` and the high sum over ``k >= j + 1`` up to the
    top lattice band (higher bands are identically zero on the grid).
    """
    cfg = EstimateConfig() if cfg is None else cfg
    grid = u.grid
    ev = PacketEvaluator(u) if evaluator is None else evaluator
    th = theta(cfg.alpha, cfg.epsilon)
    a, eps = cfg.alpha, cfg.epsilon
    rlo, rhi = resolved_band_range(grid)
    lat_lo, lat_hi = lattice_band_range(grid)
    clipped = []

    q32 = q.dilate(1.5)
    uq = ev.norm(q, j)
    u32_2 = _window_sum(ev, q32, j - 2, j + 2)
    u32_4 = _window_sum(ev, q32, j - 4, j + 4)
    if j + 4 > rhi or j - 4 < rlo:
        clipped.append("loc")

    k_lo, k_hi = math.ceil(th * j - 1e-12), j - 5
    low = 0.0
    for k in range(max(k_lo, lat_lo), k_hi + 1):
        low += 2.0 ** (j + 1.5 * k) * ev.norm(q.ancestor(k), k)
    if k_lo <= k_hi and k_lo < rlo:
        clipped.append("low")

    high = 0.0
    for k in range(j + 1, lat_hi + 1):
        high += 2.0 ** (1.5 * j + k) * ev.norm(q32, k) ** 2
    if j + 1 <= lat_hi and lat_hi > rhi:
        clipped.append("hh")

    g_diss = 2.0 ** (2 * a * j) * uq**2
    g_low = uq * u32_2 * low
    g_loc = 2.0 ** (2.5 * j) * uq * u32_4**2
    g_hh = uq * high
    d = q.side
    e_diss = 2.0 ** (2 * a * j) / (d * 2.0**j) * u32_2**2
    e_vl = 2.0 ** (2 * a * j) * 2.0 ** (-eps * j) * u32_2**2

    if flux is None:
        ops = Operators(grid, a, 1.0, cfg.dealias)
        flux = FluxFields(u, ops)
    phi = make_cutoff(q, grid).samples
    i_term, j_term = flux.flux(phi * phi, j)
    g_nl = g_low + g_loc + g_hh
    measured_c = j_term / g_nl if g_nl > 0 else (0.0 if j_term == 0 else math.nan)
    measured_diss = -i_term / g_diss if g_diss > 0 else (0.0 if i_term == 0 else math.nan)
    return EstimateTerms(time, cube_id, j, i_term, j_term, g_diss, g_low, g_loc, g_hh,
                         e_diss, e_vl, th, lhs_rate, measured_c, measured_diss,
                         2.0 ** (eps * j) < 16.0, tuple(clipped))


# ----------------------------------------------------------------------------
# regularity weights
# ----------------------------------------------------------------------------

@dataclass
class RegularityWeights:
    cube: Cube
    delta: int
    rho: float
    alpha: float = field(default=1.1, repr=False)


def rho_formula(alpha: float, epsilon: float, delta: int) -> float:
    """``5 - 4 alpha + min(10, epsilon * delta / 10)``."""
    return 5.0 - 4.0 * alpha + min(10.0, epsilon * delta / 10.0)


def regularity_weights(q: Cube, barrier, alpha: float, period: float = 1.0,
                       max_delta: int = 100000) -> RegularityWeights:
    """``delta(Q)`` and ``rho(Q)`` relative to a barrier surface.

    ``delta`` is the least ``k >= 0`` for which the ancestor ``Q_{j-k}``
    meets the surface of the barrier cube ``r Q_{j1}(x)``; the test is the
    exact sup-norm shell criterion from :mod:`pkrg.covering`.

    Raises
    ------
    DomainError
        If the center of ``q`` lies outside the barrier cube.
    """
    from .covering import barrier_half_side, surface_meets_cube
    x = np.asarray(barrier.center, float)
    a = barrier_half_side(barrier)
    from .packets import chebyshev_distance
    if float(chebyshev_distance(np.asarray(q.center), x, period)) >= a:
        raise DomainError("cube center lies outside the barrier region")
    for k in range(0, max_delta + 1):
        anc = q.ancestor(q.j - k)
        if surface_meets_cube(x, a, np.asarray(anc.center), anc.half_side, period):
            return RegularityWeights(q, k, rho_formula(alpha, q.epsilon, k), alpha)
    raise DomainError("no ancestor meets the barrier surface")
