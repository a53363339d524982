"""Invariant suites shared by the ``verify`` subcommand and the acceptance tests.

Every suite returns a :class:`SuiteResult` with a pass flag, the measured
quantities and the wall time.  ``quick=True`` shrinks sample counts for
smoke runs; the acceptance tests always use the full sizes.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import covering as cov
from . import dimension as dim
from .errors import BarrierNotFoundError
from .estimates import FluxFields, probe_rates
from .littlewood_paley import paraproduct_residuals, resolved_band_range
from .packets import Cube, SeparationTest, bump_move_error, make_cutoff
from .solver import Operators, SolverConfig, energy_check, run
from .spectral_field import (FrequencyGrid, SpectralField, leray_coeffs,
                             leray_project, random_field)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0
    note: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        keys = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items() if not isinstance(v, (list, dict)))
        return f"[{flag}] {self.name} ({self.seconds:.1f}s) {keys}"

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "seconds": self.seconds,
                "note": self.note, "metrics": _jsonable(self.metrics)}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ----------------------------------------------------------------------------
# spectral suites
# ----------------------------------------------------------------------------

PARAPRODUCT_PAD = 1.5


@_timed
def suite_paraproduct(quick: bool = False, pairs: int = 50, n: int = 64, pad: float = PARAPRODUCT_PAD,
                      seed: int = 2024) -> SuiteResult:
    """Bony reconstruction residual over seeded random pairs, every resolved band."""
    pairs = 3 if quick else pairs
    grid = FrequencyGrid(n)
    rng = np.random.default_rng(seed)
    worst = 0.0
    per_j = {}
    for _ in range(pairs):
        f = random_field(grid, rng)
        g = random_field(grid, rng)
        scale = f.norm() * g.norm()
        for j, (res, _) in paraproduct_residuals(f, g, pad=pad).items():
            r = res / scale
            per_j[j] = max(per_j.get(j, 0.0), r)
            worst = max(worst, r)
    return SuiteResult("paraproduct", worst <= 1e-10,
                       {"pairs": pairs, "pad": pad, "worst_relative": worst, "per_band": per_j})


@_timed
def suite_leray(quick: bool = False, fields: int = 100, n: int = 32, seed: int = 7) -> SuiteResult:
    """Idempotency and gradient annihilation of the Leray projector."""
    fields = 5 if quick else fields
    grid = FrequencyGrid(n)
    rng = np.random.default_rng(seed)
    kx, ky, kz = grid.k_components(half=False, derivative=True)
    worst_idem = worst_grad = 0.0
    for _ in range(fields):
        f = random_field(grid, rng)
        tf = leray_project(f)
        worst_idem = max(worst_idem, (leray_project(tf) - tf).norm() / f.norm())
        g = random_field(grid, rng).coeffs[0]
        grad = np.stack([1j * kx * g, 1j * ky * g, 1j * kz * g])
        gf = SpectralField(grid, grad)
        tg = leray_coeffs(gf.coeffs, grid, half=False)
        worst_grad = max(worst_grad, float(np.sqrt(np.sum(np.abs(tg) ** 2)) / np.sqrt(np.sum(np.abs(grad) ** 2))))
    ok = worst_idem <= 1e-12 and worst_grad <= 1e-12
    return SuiteResult("leray", ok, {"fields": fields, "idempotency": worst_idem, "gradient": worst_grad})


# ----------------------------------------------------------------------------
# Taylor-Green run shared by the flux and energy suites
# ----------------------------------------------------------------------------

FLUX_BANDS = (1, 2, 3)


@dataclass
class FluxRun:
    trajectory: object
    cubes: list
    bands: tuple
    rows: list
    fd_rows: list


@lru_cache(maxsize=2)
def taylor_green_flux_run(steps: int = 200, n: int = 64, dt: float = 1e-3, alpha: float = 1.1,
                          n_cubes: int = 10, probe_every: int = 50, seed: int = 11) -> FluxRun:
    """Integrate Taylor-Green data, tracking packets every step and probing the flux.

    At every ``probe_every``-th step the local rate of ``u_{Q,j}**2`` is
    measured by Richardson-extrapolated solver probes and compared with
    ``2 (I + J)``.  A plain centred difference along the trajectory is also
    kept for reference.
    """
    cfg = SolverConfig(alpha=alpha, dt=dt, t_end=steps * dt, n=n, snapshot_every=probe_every)
    grid = cfg.grid
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, 1.0, (n_cubes, 3)) * grid.period
    cubes = {j: [Cube(tuple(c), j) for c in centers] for j in FLUX_BANDS}
    weights = {}
    for j in FLUX_BANDS:
        for i, q in enumerate(cubes[j]):
            phi = make_cutoff(q, grid).samples
            weights[(i, j)] = phi * phi
    ops = Operators(grid, alpha, dt)
    history = {key: [] for key in weights}
    rows = []

    def callback(step, t, half):
        u = SpectralField.from_half(grid, half, divergence_free=True)
        ff = FluxFields(u, ops)
        for (i, j), w in weights.items():
            history[(i, j)].append(ff.packet_sq(w, j))
        if step % probe_every == 0:
            rates = probe_rates(half, ops, weights, FLUX_BANDS)
            for (i, j), w in weights.items():
                I, J = ff.flux(w, j)
                rows.append({"step": step, "time": t, "cube": i, "j": j, "I": I, "J": J,
                             "rate": rates[(i, j), j], "rhs": 2.0 * (I + J)})

    tr = run(cfg, callback=callback)
    fd_rows = []
    for row in rows:
        s = row["step"]
        h = history[(row["cube"], row["j"])]
        if 0 < s < len(h) - 1:
            fd_rows.append({**row, "fd_rate": (h[s + 1] - h[s - 1]) / (2 * dt)})
    return FluxRun(tr, cubes, FLUX_BANDS, rows, fd_rows)


@_timed
def suite_flux(quick: bool = False) -> SuiteResult:
    """Packet-energy rate against ``2 (I + J)`` on a Taylor-Green run."""
    fr = taylor_green_flux_run(steps=20 if quick else 200, probe_every=10 if quick else 50)
    worst = 0.0
    for r in fr.rows:
        err = abs(r["rate"] - r["rhs"]) / max(abs(r["rhs"]), 1e-8)
        worst = max(worst, err)
    fd = [abs(r["fd_rate"] - r["rhs"]) / max(abs(r["rhs"]), 1e-8) for r in fr.fd_rows]
    return SuiteResult("flux", worst <= 1e-3,
                       {"checks": len(fr.rows), "worst_relative": worst,
                        "trajectory_fd_worst": max(fd) if fd else math.nan})


@_timed
def suite_energy(quick: bool = False) -> SuiteResult:
    """Worst signed energy-inequality defect on the Taylor-Green run."""
    fr = taylor_green_flux_run(steps=20 if quick else 200, probe_every=10 if quick else 50)
    rep = energy_check(fr.trajectory)
    inc = rep.max_energy_increase
    return SuiteResult("energy", rep.worst_defect <= 1e-6,
                       {"worst_defect": rep.worst_defect, "pair": list(rep.worst_pair),
                        "max_step_energy_increase": inc})


@_timed
def suite_bumps(quick: bool = False, cfg: SeparationTest | None = None) -> SuiteResult:
    """Decay slopes of the bump-moving errors over bands 3 to 6 at 128 points."""
    cfg = SeparationTest(n=64, period=0.5, js=(3, 4, 5)) if quick and cfg is None else (cfg or SeparationTest())
    rep = bump_move_error(cfg)
    ok = rep.passed["separated"] and rep.passed["commutator"]
    return SuiteResult("bumps", ok,
                       {"slope_separated": rep.slopes["separated"],
                        "slope_commutator": rep.slopes["commutator"],
                        "slope_inside": rep.slopes["inside"],
                        "separation": rep.separation, "errors": rep.errors},
                       note="criterion requires slope <= -6 for separated and commutator")


# ----------------------------------------------------------------------------
# geometry and covers
# ----------------------------------------------------------------------------

def random_cube_pairs(count: int, rng: np.random.Generator):
    y = rng.uniform(-1.0, 1.0, (count, 3))
    a = rng.uniform(0.05, 0.5, count)
    b = rng.uniform(0.01, 0.4, count) * a * rng.choice([0.2, 1.0, 3.0], count)
    mode = rng.integers(0, 4, count)
    x = y + rng.uniform(-2.0, 2.0, (count, 3)) * a[:, None]
    # exercise the degenerate cases: concentric, and y on the boundary of Q'
    x[mode == 0] = y[mode == 0]
    m1 = mode == 1
    if np.any(m1):
        d = rng.uniform(-1.0, 1.0, (int(m1.sum()), 3))
        ax = rng.integers(0, 3, int(m1.sum()))
        d[np.arange(len(ax)), ax] = np.sign(d[np.arange(len(ax)), ax] + 1e-300)
        x[m1] = y[m1] + d * b[m1, None]
    return y, a, x, b


@_timed
def suite_geometry(quick: bool = False, pairs: int = 10_000, seed: int = 5, radii: int = 48) -> SuiteResult:
    """Surface-interval implication against dense surface sampling."""
    pairs = 500 if quick else pairs
    rng = np.random.default_rng(seed)
    y, a, x, b = random_cube_pairs(pairs, rng)
    violations = 0
    hits = 0
    for i in range(pairs):
        lo, hi = cov.geometric_interval(y[i], a[i], x[i], b[i])
        rq = float(np.max(np.abs(x[i] - y[i]))) / a[i]
        rs = np.linspace(0.0, rq + 2.5 * b[i] / a[i], radii)[1:]
        hit = cov.surface_sampling_hits(y[i], a[i], x[i], b[i], rs)
        hits += int(hit.sum())
        bad = hit & ((rs < lo - 1e-12) | (rs > hi + 1e-12))
        violations += int(bad.sum())
    return SuiteResult("geometry", violations == 0,
                       {"pairs": pairs, "sampled_hits": hits, "violations": violations})


COVER_ALPHA = 1.1
COVER_EPS = 0.01
COVER_ETA = 2.0**-12


@lru_cache(maxsize=4)
def synthetic_covers(quick: bool = False):
    """Synthetic families, their ``B_j`` and ``B_{j,k}`` for every placement."""
    if quick:
        specs = [(5, 8, "clustered")]
    else:
        specs = [(6, 12, p) for p in cov.PLACEMENTS] + [(8, 12, "clustered")]
    out = []
    for j, kmax, placement in specs:
        suite = cov.SyntheticSuite(j, kmax, COVER_ALPHA, COVER_EPS, placement=placement, seed=j)
        bad, covers = suite.build()
        bj, bjk = cov.naughty_cover(covers, j, COVER_ETA, COVER_ALPHA, extra_candidates=bad[j].centers)
        out.append((suite, bad, covers, bj, bjk))
    return tuple(out)


@_timed
def suite_covers(quick: bool = False, points: int = 1000, seed: int = 99) -> SuiteResult:
    """Barrier existence outside ``B_j`` and coverage of every bad ``j``-cube."""
    points = 100 if quick else points
    rng = np.random.default_rng(seed)
    found = total = verified = 0
    covered = True
    per = {}
    for suite, bad, covers, bj, _ in synthetic_covers(quick):
        j = suite.j
        covered &= cov.all_covered(bad[j], bj)
        hubs = np.concatenate([bad[k].centers[:4] for k in sorted(bad)])
        xs = cov.exterior_points(bj, points, rng, near=hubs)
        ok = 0
        for x in xs:
            try:
                res = cov.barrier_search(x, j, bad, COVER_EPS)
            except BarrierNotFoundError:
                continue
            ok += 1
            verified += int(res.verified)
        found += ok
        total += len(xs)
        per[f"{suite.placement}-j{j}"] = {"found": ok, "points": len(xs), "B_j": len(bj)}
    rate = found / total if total else 0.0
    ok = covered and total > 0 and rate >= 0.99 and verified == found
    return SuiteResult("covers", ok, {"barrier_rate": rate, "points": total, "verified": verified,
                                      "bad_cubes_covered": covered, "families": per})


@_timed
def suite_budgets(quick: bool = False) -> SuiteResult:
    """One constant for ``#B_{j,k}`` across levels, compared with the count implied by ``#A_k``."""
    cs, c_a = [], 0.0
    beta = 5.0 - 4.0 * COVER_ALPHA + COVER_EPS
    rows = []
    for suite, _, covers, _, bjk in synthetic_covers(quick):
        for k, fam in covers.items():
            c_a = max(c_a, len(fam) / 2.0 ** (k * beta))
        for k, fam in bjk.items():
            cs.append(fam.measured_c)
            rows.append((suite.placement, suite.j, k, len(fam), fam.measured_c))
    c = max(cs) if cs else 0.0
    limit = 64.0 * c_a
    return SuiteResult("budgets", c <= limit,
                       {"reported_c": c, "c_A": c_a, "limit_64_cA": limit, "families": len(rows)})


# ----------------------------------------------------------------------------
# dimension
# ----------------------------------------------------------------------------

@_timed
def suite_dimension(quick: bool = False) -> SuiteResult:
    dust = dim.cantor_dust(4)
    scales = [3.0**-m for m in range(1, 5)]
    fit = dim.fit_dimension([(r, dim.box_count(dust, r)) for r in scales])
    target = 3 * math.log(2) / math.log(3)
    pt = np.array([[0.3, 0.4, 0.5]])
    pscales = [2.0**-m for m in range(1, 8)]
    pfit = dim.fit_dimension([(r, dim.box_count(pt, r)) for r in pscales])
    ok = abs(fit.slope - target) <= 0.1 and abs(pfit.slope) <= 0.05
    return SuiteResult("dimension", ok, {"cantor_slope": fit.slope, "target": target,
                                         "point_slope": pfit.slope})


@_timed
def suite_bounds(quick: bool = False, samples: int = 50) -> SuiteResult:
    r1 = dim.bound_refined(Fraction(1))
    r54 = dim.bound_refined(Fraction(5, 4))
    n54 = dim.bound_naive(Fraction(5, 4))
    alphas = [Fraction(1) + Fraction(i, 4 * (samples + 1)) for i in range(1, samples + 1)]
    order = all(dim.bound_refined(a) <= dim.bound_naive(a) for a in alphas)
    ok = r1 == Fraction(5, 3) and r54 == 0 and n54 == 0 and order
    return SuiteResult("bounds", ok, {"refined_at_1": str(r1), "refined_at_5/4": str(r54),
                                      "naive_at_5/4": str(n54), "ordered_samples": samples if order else 0})


@_timed
def suite_alpha_demo(quick: bool = False, t_end: float = 1.0, dt: float = 2e-3) -> SuiteResult:
    """Random-band run above the critical exponent stays bounded."""
    cfg = SolverConfig(alpha=1.3, dt=dt, t_end=0.05 if quick else t_end, n=32 if quick else 64,
                       initial_condition="random-band", seed=3, snapshot_every=50)
    tr = run(cfg)
    sup = np.asarray(tr.energy_series.sup_norm)
    ratio = float(np.max(sup) / sup[0])
    return SuiteResult("alpha-demo", bool(np.all(np.isfinite(sup))) and ratio <= 10.0,
                       {"steps": cfg.n_steps, "sup_initial": float(sup[0]), "sup_max": float(np.max(sup)),
                        "sup_final": float(sup[-1]), "ratio": ratio})


SUITES = {
    "paraproduct": suite_paraproduct,
    "leray": suite_leray,
    "flux": suite_flux,
    "energy": suite_energy,
    "bumps": suite_bumps,
    "geometry": suite_geometry,
    "covers": suite_covers,
    "budgets": suite_budgets,
    "dimension": suite_dimension,
    "bounds": suite_bounds,
    "alpha-demo": suite_alpha_demo,
}
