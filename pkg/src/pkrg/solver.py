"""Hyperdissipative Navier-Stokes on the torus.

Solves ``u_t + (-Delta)^alpha u + T[(u . grad) u] = 0`` with ``T`` the Leray
projector, pseudo-spectrally.  The nonlinearity is formed in divergence form
``div(u (x) u)`` with 2/3-rule truncation (or 3/2 padding); dissipation is
either integrated exactly (Lawson integrating-factor RK4) or implicitly
(IMEX Euler).

All kernels work on half-spectrum arrays of shape ``(3, n, n, n//2+1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BlowUpError, ConfigError, DomainError
from .littlewood_paley import lattice_band_range, p_j
from .spectral_field import (FrequencyGrid, SpectralField, fractional_symbol,
                             irfft3, leray_coeffs, load_checkpoint, random_field,
                             rfft3, zero_nyquist)

SCHEMES = ("ifrk4", "imex-euler")
DEALIAS_RULES = ("two-thirds", "padded")
IMEX_STABILITY = 2.0


@dataclass
class SolverConfig:
    """Run parameters.

    Attributes
    ----------
    alpha : float
        Dissipation exponent in ``(1, 3/2]``.
    dt, t_end : float
        Step size and final (dimensionless) time.
    n, period : int, float
        Grid points per axis and torus side.
    dealias : {"two-thirds", "padded"}
    scheme : {"ifrk4", "imex-euler"}
    initial_condition : str
        ``"taylor-green"``, ``"random-band"`` or a checkpoint path.
    ic_bands : (int, int)
        Inclusive dyadic bands populated by the random-band initial condition.
    snapshot_every : int
        Store a snapshot every this many steps (the last step is always kept).
    sup_ceiling : float
        Blow-up is declared when the sup norm exceeds this value.
    """

    alpha: float = 1.1
    dt: float = 1e-3
    t_end: float = 0.2
    n: int = 64
    period: float = 1.0
    dealias: str = "two-thirds"
    scheme: str = "ifrk4"
    seed: int = 0
    initial_condition: str = "taylor-green"
    ic_bands: tuple = (1, 3)
    snapshot_every: int = 10
    sup_ceiling: float = 1e6

    def __post_init__(self):
        problems = []
        if not (1.0 < self.alpha <= 1.5):
            problems.append(("alpha", f"must lie in (1, 3/2], got {self.alpha}"))
        if not self.dt > 0:
            problems.append(("dt", f"must be positive, got {self.dt}"))
        if not self.t_end >= 0:
            problems.append(("t_end", f"must be nonnegative, got {self.t_end}"))
        if self.scheme not in SCHEMES:
            problems.append(("scheme", f"must be one of {SCHEMES}"))
        if self.dealias not in DEALIAS_RULES:
            problems.append(("dealias", f"must be one of {DEALIAS_RULES}"))
        if int(self.snapshot_every) < 1:
            problems.append(("snapshot_every", "must be >= 1"))
        if self.n < 16 or self.n % 2:
            problems.append(("n", f"must be an even integer >= 16, got {self.n}"))
        if not problems and self.scheme == "imex-euler":
            lam = (2 * math.pi * math.sqrt(3) * (self.n // 3) / self.period) ** (2 * self.alpha)
            if self.dt * lam > IMEX_STABILITY:
                problems.append(("dt", f"dt * lambda_max = {self.dt * lam:.3g} exceeds the "
                                       f"IMEX-Euler constant {IMEX_STABILITY}"))
        if problems:
            raise ConfigError(problems)

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.n, self.period)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class Operators:
    """Precomputed multipliers for one grid, exponent and time step."""

    def __init__(self, grid: FrequencyGrid, alpha: float, dt: float, dealias: str = "two-thirds"):
        self.grid = grid
        self.alpha = alpha
        self.dt = dt
        self.dealias = dealias
        n = grid.n
        kx, ky, kz = grid.k_components(half=True, derivative=True)
        scale = 2j * math.pi / grid.period
        self.ik = (scale * kx, scale * ky, scale * kz)
        self.lam = fractional_symbol(grid, alpha, half=True)
        self.e_half = np.exp(-0.5 * dt * self.lam)
        self.e_full = np.exp(-dt * self.lam)
        if dealias == "two-thirds":
            cut = n / 3.0
            ki, kj, kl = grid.k_components(half=True)
            self.mask = (np.abs(ki) < cut) & (np.abs(kj) < cut) & (np.abs(kl) < cut)
            self.pad = n
        else:
            self.mask = np.ones(grid.half_shape, bool)
            zero_nyquist(self.mask, half=True)
            self.pad = 3 * n // 2 + (3 * n // 2) % 2
        self.lam_max = float(np.max(self.lam[self.mask]))

    def physical(self, half: np.ndarray) -> np.ndarray:
        if self.pad == self.grid.n:
            return irfft3(half, self.grid.n)
        from .littlewood_paley import pad_half
        return irfft3(pad_half(half, self.pad), self.pad)

    def spectral(self, samples: np.ndarray) -> np.ndarray:
        if self.pad == self.grid.n:
            return rfft3(samples)
        from .littlewood_paley import truncate_half
        return truncate_half(rfft3(samples), self.grid.n)

    def nonlinear(self, half: np.ndarray, samples=None) -> np.ndarray:
        """``-T[div(u (x) u)]`` truncated to the dealiasing mask."""
        u = self.physical(half) if samples is None else samples
        ikx, iky, ikz = self.ik
        prods = np.stack([u[0] * u[0], u[0] * u[1], u[0] * u[2],
                          u[1] * u[1], u[1] * u[2], u[2] * u[2]])
        w = self.spectral(prods)
        xx, xy, xz, yy, yz, zz = w
        div = np.stack([ikx * xx + iky * xy + ikz * xz,
                        ikx * xy + iky * yy + ikz * yz,
                        ikx * xz + iky * yz + ikz * zz])
        out = -leray_coeffs(div, self.grid)
        out *= self.mask
        return out

    def rhs(self, half: np.ndarray) -> np.ndarray:
        """Full time derivative ``-(-Delta)^alpha u - T[div(u (x) u)]``."""
        return -self.lam * half + self.nonlinear(half)


def ifrk4_step(half: np.ndarray, ops: Operators, dt=None, first=None):
    """One Lawson integrating-factor RK4 step.

    ``dt`` overrides the step held in ``ops`` (used by short probes, where the
    exponentials are recomputed).  ``first`` may carry the precomputed
    nonlinear term at the current state.
    """
    if dt is None or dt == ops.dt:
        e2, e1 = ops.e_half, ops.e_full
        dt = ops.dt
    else:
        e2, e1 = np.exp(-0.5 * dt * ops.lam), np.exp(-dt * ops.lam)
    k1 = ops.nonlinear(half) if first is None else first
    k2 = ops.nonlinear(e2 * (half + 0.5 * dt * k1))
    k3 = ops.nonlinear(e2 * half + 0.5 * dt * k2)
    k4 = ops.nonlinear(e1 * half + dt * e2 * k3)
    out = e1 * half + (dt / 6.0) * (e1 * k1 + 2.0 * e2 * (k2 + k3) + k4)
    out = leray_coeffs(out, ops.grid)
    out *= ops.mask
    return out


def imex_euler_step(half: np.ndarray, ops: Operators, first=None):
    """Explicit nonlinearity, implicit dissipation, first order."""
    nl = ops.nonlinear(half) if first is None else first
    out = (half + ops.dt * nl) / (1.0 + ops.dt * ops.lam)
    out = leray_coeffs(out, ops.grid)
    out *= ops.mask
    return out


def taylor_green(grid: FrequencyGrid) -> SpectralField:
    """Taylor-Green vortex normalised to unit L2 norm."""
    x = 2 * math.pi * grid.axis_points() / grid.period
    X, Y, Z = x[:, None, None], x[None, :, None], x[None, None, :]
    u = np.zeros((3,) + grid.shape)
    u[0] = np.sin(X) * np.cos(Y) * np.cos(Z)
    u[1] = -np.cos(X) * np.sin(Y) * np.cos(Z)
    half = rfft3(u)
    half = leray_coeffs(half, grid)
    f = SpectralField.from_half(grid, half)
    return SpectralField(grid, f.coeffs / f.norm(), divergence_free=True)


def shear_mode(grid: FrequencyGrid, amplitude: float = 1.0, k: int = 1) -> SpectralField:
    """``u = (A sin(2 pi k x_2 / L), 0, 0)``: an exact decaying solution."""
    x = 2 * math.pi * k * grid.axis_points() / grid.period
    u = np.zeros((3,) + grid.shape)
    u[0] = amplitude * np.sin(x)[None, :, None]
    return SpectralField.from_half(grid, rfft3(u), divergence_free=True)


def random_band_field(grid: FrequencyGrid, seed: int, bands=(1, 3)) -> SpectralField:
    """Seeded divergence-free field supported in the dyadic bands ``bands``, unit norm."""
    rng = np.random.default_rng(seed)
    f = random_field(grid, rng, divergence_free=True)
    lo, hi = bands
    sym = sum(p_j(grid.xi(half=True), j) for j in range(lo, hi + 1))
    half = f.half * sym
    g = SpectralField.from_half(grid, half)
    return SpectralField(grid, g.coeffs / g.norm(), divergence_free=True)


def initial_field(cfg: SolverConfig) -> SpectralField:
    grid = cfg.grid
    ic = cfg.initial_condition
    if ic == "taylor-green":
        return taylor_green(grid)
    if ic == "random-band":
        return random_band_field(grid, cfg.seed, tuple(cfg.ic_bands))
    path = Path(ic)
    if not path.exists():
        raise ConfigError([("initial_condition", f"unknown tag or missing checkpoint {ic!r}")])
    f, _, _ = load_checkpoint(path)
    if f.grid != grid:
        raise ConfigError([("initial_condition", f"checkpoint grid {f.grid} differs from config")])
    return SpectralField(grid, leray_coeffs(f.coeffs, grid, half=False), divergence_free=True)


def dominant_band(half: np.ndarray, grid: FrequencyGrid):
    """Dyadic band with the largest energy (finite entries only)."""
    e = np.sum(np.abs(np.nan_to_num(half, nan=0.0, posinf=0.0, neginf=0.0)) ** 2, axis=0)
    xi = grid.xi(half=True)
    bottom, top = lattice_band_range(grid)
    best, best_e = None, -1.0
    for j in range(bottom, top + 1):
        ej = float(np.sum(e * p_j(xi, j)))
        if ej > best_e:
            best, best_e = j, ej
    return best


def half_energy_weights(grid: FrequencyGrid) -> np.ndarray:
    """Multiplicities turning half-spectrum sums into full-spectrum sums."""
    w = np.full(grid.half_shape, 2.0)
    w[..., 0] = 1.0
    w[..., -1] = 1.0
    return w


def _phi_integrals(lam: np.ndarray, dt: float):
    """Closed-form integrals of the exponential interpolant over one step.

    With ``E(s) = exp(-lam s)`` and ``F(s) = (1 - E(s)) / lam`` returns
    ``int E^2``, ``int E F`` and ``int F^2`` over ``[0, dt]``.
    """
    x = lam * dt
    small = x < 1e-3
    xs = np.where(small, 1.0, x)
    em1 = -np.expm1(-xs)            # 1 - e^{-x}
    em2 = -np.expm1(-2 * xs)        # 1 - e^{-2x}
    i1 = dt * em2 / (2 * xs)
    i2 = dt**2 * (em1 - em2 / 2) / xs**2
    i3 = dt**3 * (1 - 2 * em1 / xs + em2 / (2 * xs)) / xs**2
    # series for tiny lam*dt
    s1 = dt * (1 - x + 2 * x**2 / 3)
    s2 = dt**2 * (0.5 - x / 2 + 7 * x**2 / 24)
    s3 = dt**3 * (1 / 3 - x / 4 + 7 * x**2 / 60)
    return (np.where(small, s1, i1), np.where(small, s2, i2), np.where(small, s3, i3))


class DissipationQuadrature:
    """Per-step integral of ``||(-Delta)^{alpha/2} u||^2`` consistent with the exponential integrator.

    Within a step each mode is modelled as ``E(s) a + F(s) b`` where ``b`` is the
    constant forcing that maps ``a = u_n`` to ``u_{n+1}`` exactly; the square of
    this interpolant integrates in closed form.
    """

    def __init__(self, ops: Operators):
        self.ops = ops
        g = ops.grid
        self.weights = half_energy_weights(g) * g.volume
        lam, dt = ops.lam, ops.dt
        self.i1, self.i2, self.i3 = _phi_integrals(lam, dt)
        x = lam * dt
        with np.errstate(divide="ignore", invalid="ignore"):
            f_dt = np.where(x > 0, -np.expm1(-x) / np.where(lam > 0, lam, 1.0), dt)
        self.f_dt = f_dt

    def step(self, a: np.ndarray, b_next: np.ndarray) -> float:
        ops = self.ops
        b = (b_next - ops.e_full * a) / self.f_dt
        aa = np.sum(np.abs(a) ** 2, axis=0)
        ab = np.sum(np.real(a * np.conj(b)), axis=0)
        bb = np.sum(np.abs(b) ** 2, axis=0)
        dens = ops.lam * (aa * self.i1 + 2 * ab * self.i2 + bb * self.i3)
        return float(np.sum(self.weights * dens))


@dataclass
class EnergySeries:
    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)        # ||u||^2
    dissipation: list = field(default_factory=list)   # cumulative int ||(-Delta)^{alpha/2} u||^2
    sup_norm: list = field(default_factory=list)
    divergence: list = field(default_factory=list)


@dataclass
class Trajectory:
    """Snapshots plus the per-step energy series of a run."""

    config: SolverConfig
    times: list
    snapshots: list
    energy_series: EnergySeries

    def snapshot_pairs(self):
        return list(zip(self.times, self.snapshots))


def energy(half: np.ndarray, grid: FrequencyGrid) -> float:
    return float(grid.volume * np.sum(half_energy_weights(grid) * np.sum(np.abs(half) ** 2, axis=0)))


def _relative_divergence(half: np.ndarray, ops: Operators) -> float:
    ikx, iky, ikz = ops.ik
    div = ikx * half[0] + iky * half[1] + ikz * half[2]
    kn = np.sqrt(np.abs(ikx) ** 2 + np.abs(iky) ** 2 + np.abs(ikz) ** 2)
    cn = np.sqrt(np.sum(np.abs(half) ** 2, axis=0))
    m = (kn > 0) & (cn > 1e-300)
    if not np.any(m):
        return 0.0
    return float(np.max(np.abs(div[m]) / (kn[m] * cn[m])))


class Stepper:
    """Stateful wrapper: advances a half spectrum and tracks diagnostics."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        self.ops = Operators(self.grid, cfg.alpha, cfg.dt, cfg.dealias)
        self.quad = DissipationQuadrature(self.ops)

    def advance(self, half: np.ndarray, time: float):
        """Return ``(new_half, samples_of_old_state)``; raises on blow-up."""
        ops = self.ops
        samples = ops.physical(half)
        sup = float(np.sqrt(np.max(np.sum(samples**2, axis=0))))
        if not np.isfinite(sup) or sup > self.cfg.sup_ceiling:
            raise BlowUpError("sup norm non-finite or above ceiling", time, dominant_band(half, self.grid))
        first = ops.nonlinear(half, samples)
        if self.cfg.scheme == "ifrk4":
            new = ifrk4_step(half, ops, first=first)
        else:
            new = imex_euler_step(half, ops, first=first)
        if not np.all(np.isfinite(new)):
            raise BlowUpError("non-finite coefficients", time + ops.dt, dominant_band(new, self.grid))
        return new, sup


def step(u: SpectralField, cfg: SolverConfig) -> SpectralField:
    """Advance ``u`` by one time step of ``cfg``."""
    if not u.divergence_free:
        raise DomainError("step requires a divergence-free field")
    st = Stepper(cfg)
    new, _ = st.advance(u.half.copy() * st.ops.mask, 0.0)
    return SpectralField.from_half(u.grid, new, divergence_free=True)


def run(cfg: SolverConfig, u0: SpectralField | None = None, callback=None) -> Trajectory:
    """Integrate from the configured initial condition to ``t_end``.

    ``callback(step_index, time, half)`` is invoked after every step (and for
    the initial state with index 0).
    """
    st = Stepper(cfg)
    grid, ops = st.grid, st.ops
    u0 = initial_field(cfg) if u0 is None else u0
    half = u0.half.copy() * ops.mask
    series = EnergySeries()
    t = 0.0
    series.times.append(t)
    series.energy.append(energy(half, grid))
    series.dissipation.append(0.0)
    series.divergence.append(_relative_divergence(half, ops))
    times, snaps = [t], [SpectralField.from_half(grid, half, divergence_free=True)]
    if callback is not None:
        callback(0, t, half)
    nsteps = cfg.n_steps
    for i in range(1, nsteps + 1):
        new, sup = st.advance(half, t)
        series.sup_norm.append(sup)
        series.dissipation.append(series.dissipation[-1] + st.quad.step(half, new))
        half = new
        t = i * cfg.dt
        series.times.append(t)
        series.energy.append(energy(half, grid))
        series.divergence.append(_relative_divergence(half, ops))
        if callback is not None:
            callback(i, t, half)
        if i % cfg.snapshot_every == 0 or i == nsteps:
            times.append(t)
            snaps.append(SpectralField.from_half(grid, half, divergence_free=True))
    samples = ops.physical(half)
    series.sup_norm.append(float(np.sqrt(np.max(np.sum(samples**2, axis=0)))))
    return Trajectory(cfg, times, snaps, series)


@dataclass
class EnergyReport:
    """Signed defects of ``1/2 E(t) + D(s, t) - 1/2 E(s)`` (should be <= 0)."""

    worst_defect: float
    worst_pair: tuple
    defect_from_start: np.ndarray
    max_energy_increase: float


def energy_check(tr: Trajectory) -> EnergyReport:
    """Worst signed energy-inequality defect over all pairs ``s < t`` of the series."""
    s = tr.energy_series
    e = np.asarray(s.energy)
    d = np.asarray(s.dissipation)
    c = 0.5 * e + d
    from_start = c - c[0]
    worst, pair = 0.0, (0, 0)
    if len(c) > 1:
        run_min = np.minimum.accumulate(c)
        arg_min = np.zeros(len(c), int)
        cur = 0
        for i in range(len(c)):
            if c[i] <= c[cur]:
                cur = i
            arg_min[i] = cur
        gaps = c[1:] - run_min[:-1]
        k = int(np.argmax(gaps))
        worst = float(gaps[k])
        pair = (float(s.times[arg_min[k]]), float(s.times[k + 1]))
    inc = float(np.max(np.diff(e))) if len(e) > 1 else 0.0
    return EnergyReport(worst, pair, from_start, inc)
