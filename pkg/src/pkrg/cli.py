"""Command-line interface and the staged pipeline.

Subcommands: ``solve``, ``analyze``, ``cover``, ``dimension``, ``verify``,
``report`` and ``run`` (the whole pipeline from a YAML config).  Exit codes
are 0 for success, 1 for a numerical failure and 2 for a usage or config
error.  Options can also be supplied through ``PKRG_*`` environment
variables; see :func:`apply_env_overrides`.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .covering import (BARRIER_RMAX, CoverFamily, all_covered, barrier_search, classify,
                       exterior_points, naughty_cover, refined_cover, vitali_cover)
from .dimension import CubeSet, bound_hausdorff, bound_naive, bound_refined, box_count, fit_dimension
from .errors import (BarrierNotFoundError, BlowUpError, ConfigError, DomainError, PkrgError,
                     ResolutionError)
from .estimates import EstimateConfig, FluxFields, estimate_terms, probe_rates, theta
from .littlewood_paley import resolved_band_range
from .packets import Cube, PacketEvaluator, epsilon_bound, make_cutoff
from .solver import Operators, SolverConfig, energy_check, run
from .spectral_field import (FrequencyGrid, SpectralField, leray_coeffs, load_checkpoint,
                             save_checkpoint, set_workers)

log = logging.getLogger("pkrg")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
STAGES = ("solve", "analyze", "cover", "dimension")
CHECKPOINT_GLOB = "snapshot_*.pkrg"


class UsageError(PkrgError):
    pass


# ----------------------------------------------------------------------------
# file helpers
# ----------------------------------------------------------------------------

def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, tuple)):
        return list(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


def parse_window(text) -> tuple:
    if isinstance(text, (list, tuple)):
        lo, hi = text
    else:
        try:
            lo, hi = str(text).split(":")
        except ValueError:
            raise UsageError(f"window must look like 'T0:T1', got {text!r}") from None
    return float(lo), float(hi)


def parse_bands(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return int(text[0]), int(text[1])
    parts = str(text).split(":")
    if len(parts) == 1:
        return int(parts[0]), int(parts[0])
    return int(parts[0]), int(parts[1])


# ----------------------------------------------------------------------------
# stages
# ----------------------------------------------------------------------------

def stage_solve(out: Path, alpha: float, n: int, dt: float, t_end: float, ic: str = "taylor-green",
                seed: int = 0, scheme: str = "ifrk4", dealias: str = "two-thirds", period: float = 1.0,
                snapshot_every: int = 10, sup_ceiling: float = 1e6) -> list:
    """Integrate and write checkpoints plus ``energy.csv``; returns the written paths."""
    out.mkdir(parents=True, exist_ok=True)
    cfg = SolverConfig(alpha=alpha, dt=dt, t_end=t_end, n=n, period=period, dealias=dealias,
                       scheme=scheme, seed=seed, initial_condition=ic, snapshot_every=snapshot_every,
                       sup_ceiling=sup_ceiling)
    tr = run(cfg)
    paths = []
    for i, (t, u) in enumerate(tr.snapshot_pairs()):
        p = out / f"snapshot_{i:05d}.pkrg"
        save_checkpoint(p, u, t, alpha)
        paths.append(p)
    rep = energy_check(tr)
    s = tr.energy_series
    rows = zip(s.times, s.energy, s.dissipation, rep.defect_from_start)
    paths.append(write_csv(out / "energy.csv", ["time", "energy", "dissipation", "defect"], rows))
    meta = {"solver": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()},
            "worst_defect": rep.worst_defect, "worst_pair": list(rep.worst_pair),
            "sup_norm_max": float(np.max(s.sup_norm)), "steps": cfg.n_steps}
    paths.append(write_json(out / "run.json", meta))
    return paths


def load_run(run_dir: Path):
    """``[(time, field)]`` from the checkpoints in ``run_dir`` and the stored exponent."""
    files = sorted(Path(run_dir).glob(CHECKPOINT_GLOB))
    if not files:
        raise UsageError(f"no checkpoints found in {run_dir}")
    pairs, alpha = [], None
    for f in files:
        u, t, a = load_checkpoint(f)
        # single-precision storage leaves a ~1e-8 divergence; project it away
        u = SpectralField(u.grid, leray_coeffs(u.coeffs, u.grid, half=False), divergence_free=True)
        pairs.append((t, u))
        alpha = a
    return pairs, alpha


def analysis_cubes(grid: FrequencyGrid, count: int, seed: int, epsilon: float, j: int) -> list:
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, grid.period, (count, 3))
    return [Cube(tuple(c), j, epsilon) for c in centers]


def stage_analyze(run_dir: Path, bands=None, cubes: int = 4, seed: int = 0, epsilon: float = 0.01,
                  out: Path | None = None) -> list:
    """Packets and estimate terms at every snapshot; writes ``packets.csv`` and ``estimates.csv``.

    Bands whose cubes span fewer than eight cells are skipped and listed in
    ``analysis.json``.
    """
    out = Path(run_dir) if out is None else out
    out.mkdir(parents=True, exist_ok=True)
    pairs, alpha = load_run(run_dir)
    grid = pairs[0][1].grid
    lo, hi = resolved_band_range(grid) if bands is None else parse_bands(bands)
    ecfg = EstimateConfig(alpha=alpha, epsilon=epsilon)
    ops = Operators(grid, alpha, 1.0)
    skipped = {}
    usable = []
    for j in range(lo, hi + 1):
        try:
            for q in analysis_cubes(grid, cubes, seed, epsilon, j):
                make_cutoff(q, grid)
            usable.append(j)
        except ResolutionError as exc:
            skipped[j] = str(exc)
    prows, erows = [], []
    names = None
    weights = {}
    for j in usable:
        for cid, q in enumerate(analysis_cubes(grid, cubes, seed, epsilon, j)):
            phi = make_cutoff(q, grid).samples
            weights[cid, j] = phi * phi
    for t, u in pairs:
        ev = PacketEvaluator(u)
        ff = FluxFields(u, ops)
        rates = probe_rates(u.half * ops.mask, ops, weights, usable) if usable else {}
        for j in usable:
            for cid, q in enumerate(analysis_cubes(grid, cubes, seed, epsilon, j)):
                prows.append((t, j, cid, *q.center, ev.norm(q, j)))
                lhs = rates.get(((cid, j), j), math.nan)
                et = estimate_terms(u, q, j, ecfg, t, cid, ev, ff, lhs_rate=lhs)
                row = et.row()
                names = names or list(row)
                erows.append([row[k] for k in names])
    paths = [write_csv(out / "packets.csv", ["time", "j", "cube_id", "center_x", "center_y", "center_z", "u_Qj"],
                       prows)]
    paths.append(write_csv(out / "estimates.csv", names or ["time"], erows))
    paths.append(write_json(out / "analysis.json", {"bands": usable, "skipped": skipped, "cubes": cubes,
                                                    "seed": seed, "epsilon": epsilon, "alpha": alpha}))
    return paths


def _family_json(fam: CoverFamily, level_key: str) -> dict:
    return {"level": fam.j, "k": fam.k, "provenance": fam.provenance, "sidelength": fam.side,
            "count": len(fam), "budget": fam.budget,
            "measured_c": None if not math.isfinite(fam.measured_c) else fam.measured_c,
            "centers": np.round(fam.centers, 12).tolist(), "meta": fam.meta, "key": level_key}


def build_covers(pairs, alpha: float, j: int, k_max: int, eta: float, window, epsilon: float = 0.01,
                 test_points: int = 64, seed: int = 0, retries: int = 8):
    """Classify, build ``A_k``, ``B_k`` and ``C_j``; halve ``eta`` when a barrier is missing.

    Returns a dict ready for ``covers.json``.
    """
    grid = pairs[0][1].grid
    th = theta(alpha, epsilon)
    k_lo = max(1, math.floor(th * j - 10))
    levels = range(k_lo, k_max + 1)
    bad, acov = {}, {}
    for k in levels:
        recs = classify(pairs, k, window, alpha, epsilon)
        centers = np.array([r.cube.center for r in recs if r.verdict == "bad"]).reshape(-1, 3)
        bad[k] = CoverFamily(k, epsilon, centers, "bad", period=grid.period)
        acov[k] = vitali_cover(bad[k], alpha=alpha)
    rng = np.random.default_rng(seed)
    attempts = []
    for attempt in range(retries + 1):
        bcov = {}
        for k in levels:
            bcov[k], _ = naughty_cover(acov, k, eta, alpha, epsilon)
        bj = bcov[j]
        xs = exterior_points(bj, test_points, rng) if test_points else np.zeros((0, 3))
        missing = 0
        for x in xs:
            try:
                barrier_search(x, j, bad, epsilon, grid.period)
            except BarrierNotFoundError:
                missing += 1
        attempts.append({"eta": eta, "exterior_points": int(len(xs)), "barrier_missing": missing})
        if missing == 0:
            break
        if attempt == retries:
            raise BarrierNotFoundError(f"barrier missing for {missing} exterior points after {retries} retries",
                                       math.nan)
        eta *= 0.5
    cj = refined_cover(bcov, j, th, alpha, epsilon, grid.period)
    fams = {}
    for k in levels:
        fams[f"A_{k}"] = _family_json(acov[k], f"A_{k}")
        fams[f"B_{k}"] = _family_json(bcov[k], f"B_{k}")
    fams[f"C_{j}"] = _family_json(cj, f"C_{j}")
    return {"j": j, "k_range": [k_lo, k_max], "eta": eta, "epsilon": epsilon, "alpha": alpha,
            "theta": th, "window": list(window), "period": grid.period, "barrier_rmax": BARRIER_RMAX,
            "bad_counts": {str(k): len(bad[k]) for k in levels},
            "bad_covered": bool(all_covered(bad[j], bcov[j])) if len(bad[j]) else True,
            "attempts": attempts, "families": fams}


def stage_cover(run_dir: Path, j: int, eta: float, window, k_max: int | None = None, epsilon: float = 0.01,
                test_points: int = 64, seed: int = 0, out: Path | None = None) -> list:
    out = Path(run_dir) if out is None else out
    out.mkdir(parents=True, exist_ok=True)
    pairs, alpha = load_run(run_dir)
    k_max = j + 2 if k_max is None else k_max
    data = build_covers(pairs, alpha, j, k_max, eta, parse_window(window), epsilon, test_points, seed)
    return [write_json(out / "covers.json", data)]


def default_scales(period: float = 1.0, count: int = 5) -> list:
    return [period * 2.0 ** -m for m in range(1, count + 1)]


def stage_dimension(covers_path: Path, alpha: float | None = None, scales=None, out: Path | None = None,
                    provenance: str = "C") -> list:
    """Box counts of the ``C_j`` families (or ``provenance`` prefix) in ``covers.json``."""
    covers_path = Path(covers_path)
    out = covers_path.parent if out is None else out
    data = json.loads(covers_path.read_text())
    alpha = data.get("alpha") if alpha is None else alpha
    period = data.get("period", 1.0)
    scales = default_scales(period) if scales is None else [float(s) for s in scales]
    rows, merged = [], []
    for key, fam in sorted(data["families"].items()):
        if not key.startswith(provenance + "_") or not fam["count"]:
            continue
        merged.append(CubeSet(fam["centers"], 0.5 * fam["sidelength"], period))
        cs = merged[-1]
        for r in scales:
            rows.append((r, box_count(cs, r, period), key))
    summary = {"alpha": alpha, "window": data.get("window"), "scales": scales,
               "bound_naive": float(bound_naive(alpha)), "bound_refined": float(bound_refined(alpha)),
               "bound_hausdorff": float(bound_hausdorff(alpha)), "slope": None, "residual": None,
               "counts": None, "note": ""}
    if merged:
        allc = CubeSet(np.concatenate([m.centers for m in merged]),
                       np.concatenate([m.half_sides for m in merged]), period)
        counts = [(r, box_count(allc, r, period)) for r in scales]
        summary["counts"] = counts
        try:
            fit = fit_dimension(counts)
            summary["slope"], summary["residual"] = fit.slope, fit.residual
            summary["within_refined_plus_0.3"] = fit.slope <= summary["bound_refined"] + 0.3
        except DomainError as exc:
            summary["note"] = str(exc)
    else:
        summary["note"] = "no cubes in the selected families; nothing to count"
    paths = [write_csv(out / "dimension.csv", ["r", "N", "provenance"], rows)]
    paths.append(write_json(out / "dimension.json", summary))
    return paths


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "alpha": 1.2,
    "epsilon": 0.01,
    "seed": 0,
    "threads": 1,
    "out_dir": "run",
    "stages": list(STAGES),
    "solve": {"n": 64, "period": 1.0, "dt_time": 1e-3, "t_end_time": 0.05, "initial_condition": "taylor-green",
              "scheme": "ifrk4", "dealias": "two-thirds", "snapshot_every": 10, "sup_ceiling": 1e6},
    "analyze": {"bands": None, "cubes": 4},
    "cover": {"j": 3, "k_max": 5, "eta": 2.0**-12, "window_time": [0.0, 0.05], "test_points": 32},
    "dimension": {"scales": None},
}

_TYPES = {
    "alpha": float, "epsilon": float, "seed": int, "threads": int, "out_dir": str, "stages": list,
    "solve.n": int, "solve.period": float, "solve.dt_time": float, "solve.t_end_time": float,
    "solve.initial_condition": str, "solve.scheme": str, "solve.dealias": str, "solve.snapshot_every": int,
    "solve.sup_ceiling": float, "analyze.cubes": int, "cover.j": int, "cover.k_max": int, "cover.eta": float,
    "cover.test_points": int,
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _get(cfg: dict, path: str):
    cur = cfg
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur


def _set(cfg: dict, path: str, value) -> None:
    *head, last = path.split(".")
    cur = cfg
    for part in head:
        cur = cur[part]
    cur[last] = value


def validate_config(cfg: dict) -> dict:
    """Type, range and cross-field checks; raises :class:`ConfigError` listing every problem."""
    problems = []
    known = set(DEFAULT_CONFIG)
    for key in cfg:
        if key not in known:
            problems.append((key, "unknown key"))
    for sect in ("solve", "analyze", "cover", "dimension"):
        if sect in cfg and isinstance(cfg[sect], dict):
            for key in cfg[sect]:
                if key not in DEFAULT_CONFIG[sect]:
                    problems.append((f"{sect}.{key}", "unknown key"))
    for path, typ in _TYPES.items():
        v = _get(cfg, path)
        if v is None:
            problems.append((path, "missing"))
            continue
        if typ is float and isinstance(v, str):
            # YAML 1.1 reads "1e6" (no exponent sign) as a string
            try:
                v = float(v)
                _set(cfg, path, v)
            except ValueError:
                pass
        if typ is float and isinstance(v, (int, float)) and not isinstance(v, bool):
            continue
        if typ is int and isinstance(v, int) and not isinstance(v, bool):
            continue
        if typ in (str, list) and isinstance(v, typ):
            continue
        problems.append((path, f"expected {typ.__name__}, got {type(v).__name__}"))
    if problems:
        raise ConfigError(problems)
    a, e = float(cfg["alpha"]), float(cfg["epsilon"])
    if not 1.0 < a <= 1.5:
        problems.append(("alpha", f"must lie in (1, 3/2], got {a}"))
    else:
        cap = epsilon_bound(a)
        if not 0.0 < e < cap:
            problems.append(("epsilon", f"must lie in (0, {cap:.6g}) = (0, min((4 alpha - 4)/3, 1/20)), got {e}"))
    for st in cfg["stages"]:
        if st not in STAGES:
            problems.append(("stages", f"unknown stage {st!r}; choose from {STAGES}"))
    if cfg["threads"] < 1:
        problems.append(("threads", "must be >= 1"))
    s = cfg["solve"]
    if s["dt_time"] <= 0:
        problems.append(("solve.dt_time", "must be positive"))
    if s["t_end_time"] < 0:
        problems.append(("solve.t_end_time", "must be nonnegative"))
    if s["n"] < 16 or s["n"] % 2:
        problems.append(("solve.n", "must be an even integer >= 16"))
    c = cfg["cover"]
    if not 0.0 < c["eta"] < 1.0:
        problems.append(("cover.eta", f"must lie in (0, 1), got {c['eta']}"))
    if c["k_max"] < c["j"]:
        problems.append(("cover.k_max", "must be >= cover.j"))
    try:
        w = parse_window(c["window_time"])
        if not w[1] > w[0]:
            problems.append(("cover.window_time", "must satisfy t0 < t1"))
    except (UsageError, TypeError, ValueError):
        problems.append(("cover.window_time", "expected [t0, t1]"))
    if problems:
        raise ConfigError(problems)
    return cfg


def apply_env_overrides(cfg: dict, environ=None) -> dict:
    """``PKRG_ALPHA=1.3`` sets ``alpha``; ``PKRG_SOLVE__N=32`` sets ``solve.n``.

    Values are parsed as YAML scalars.
    """
    environ = os.environ if environ is None else environ
    out = copy.deepcopy(cfg)
    for name, raw in environ.items():
        if not name.startswith("PKRG_") or name == "PKRG_CONFIG":
            continue
        path = name[5:].lower().split("__")
        cur = out
        for part in path[:-1]:
            cur = cur.setdefault(part, {})
        cur[path[-1]] = yaml.safe_load(raw)
    return out


def load_config(path=None, environ=None) -> dict:
    """Defaults, then the YAML file, then environment overrides; validated."""
    user = {}
    if path is not None:
        try:
            user = yaml.safe_load(Path(path).read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError([("<file>", f"YAML parse error: {exc}")]) from None
        if not isinstance(user, dict):
            raise ConfigError([("<file>", "top level must be a mapping")])
    cfg = _merge(DEFAULT_CONFIG, user)
    cfg = apply_env_overrides(cfg, environ)
    return validate_config(cfg)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=_json_default).encode()).hexdigest()


@dataclass
class StageRecord:
    name: str
    seconds: float
    artifacts: dict = field(default_factory=dict)


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    tool_version: str
    stages: list = field(default_factory=list)

    def digests(self) -> dict:
        return {p: d for s in self.stages for p, d in s.artifacts.items()}

    def as_dict(self) -> dict:
        return {"config_hash": self.config_hash, "seed": self.seed, "tool_version": self.tool_version,
                "stages": [asdict(s) for s in self.stages]}


class StageError(PkrgError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


def run_pipeline(config_path=None, cfg: dict | None = None, environ=None) -> RunManifest:
    """Execute the configured stages in order and write ``manifest.json``.

    Raises
    ------
    ConfigError
        For an invalid configuration, before any stage runs.
    StageError
        Naming the failed stage; earlier outputs are kept.
    """
    cfg = load_config(config_path, environ) if cfg is None else validate_config(_merge(DEFAULT_CONFIG, cfg))
    set_workers(cfg["threads"])
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(config_hash(cfg), cfg["seed"], __version__)
    s, c = cfg["solve"], cfg["cover"]
    for name in cfg["stages"]:
        t0 = time.perf_counter()
        try:
            if name == "solve":
                paths = stage_solve(out, cfg["alpha"], s["n"], s["dt_time"], s["t_end_time"],
                                    s["initial_condition"], cfg["seed"], s["scheme"], s["dealias"],
                                    s["period"], s["snapshot_every"], s["sup_ceiling"])
            elif name == "analyze":
                a = cfg["analyze"]
                paths = stage_analyze(out, a["bands"], a["cubes"], cfg["seed"], cfg["epsilon"])
            elif name == "cover":
                paths = stage_cover(out, c["j"], c["eta"], c["window_time"], c["k_max"], cfg["epsilon"],
                                    c["test_points"], cfg["seed"])
            else:
                paths = stage_dimension(out / "covers.json", cfg["alpha"], cfg["dimension"]["scales"])
        except PkrgError as exc:
            raise StageError(name, exc) from exc
        rec = StageRecord(name, time.perf_counter() - t0,
                          {str(Path(p).relative_to(out)): sha256_of(p) for p in paths})
        man.stages.append(rec)
    write_json(out / "manifest.json", man.as_dict())
    return man


# ----------------------------------------------------------------------------
# argparse front end
# ----------------------------------------------------------------------------

def _env(name, default):
    return os.environ.get("PKRG_" + name, default)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pkrg", description="Energy packets, covers and box counting "
                                "for hyperdissipative Navier-Stokes on the torus.")
    p.add_argument("--threads", type=int, default=int(_env("THREADS", 1)), help="FFT worker cap")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="integrate and write checkpoints and energy.csv")
    s.add_argument("--alpha", type=float, default=float(_env("ALPHA", 1.1)))
    s.add_argument("--n", type=int, default=int(_env("N", 64)))
    s.add_argument("--dt", type=float, default=float(_env("DT", 1e-3)))
    s.add_argument("--t-end", type=float, default=float(_env("T_END", 0.1)))
    s.add_argument("--ic", default=_env("IC", "taylor-green"),
                   help="taylor-green, random-band or a checkpoint path")
    s.add_argument("--seed", type=int, default=int(_env("SEED", 0)))
    s.add_argument("--scheme", default=_env("SCHEME", "ifrk4"))
    s.add_argument("--dealias", default=_env("DEALIAS", "two-thirds"))
    s.add_argument("--period", type=float, default=float(_env("PERIOD", 1.0)))
    s.add_argument("--snapshot-every", type=int, default=int(_env("SNAPSHOT_EVERY", 10)))
    s.add_argument("--out", required=True, type=Path)

    a = sub.add_parser("analyze", help="packets.csv and estimates.csv for a run")
    a.add_argument("--run", required=True, type=Path)
    a.add_argument("--bands", default=None, help="'lo:hi' (default: resolved range)")
    a.add_argument("--cubes", type=int, default=4)
    a.add_argument("--seed", type=int, default=int(_env("SEED", 0)))
    a.add_argument("--epsilon", type=float, default=float(_env("EPSILON", 0.01)))

    c = sub.add_parser("cover", help="classification and cover families into covers.json")
    c.add_argument("--run", required=True, type=Path)
    c.add_argument("--j", type=int, required=True)
    c.add_argument("--k-max", type=int, default=None)
    c.add_argument("--eta", type=float, default=float(_env("ETA", 2.0**-12)))
    c.add_argument("--window", required=True, help="'t0:t1'")
    c.add_argument("--epsilon", type=float, default=float(_env("EPSILON", 0.01)))
    c.add_argument("--test-points", type=int, default=32)
    c.add_argument("--seed", type=int, default=int(_env("SEED", 0)))

    d = sub.add_parser("dimension", help="box counts of cover families")
    d.add_argument("--covers", required=True, type=Path)
    d.add_argument("--alpha", type=float, default=None)
    d.add_argument("--scales", type=float, nargs="+", default=None)
    d.add_argument("--provenance", default="C", help="family prefix: A, B or C")

    v = sub.add_parser("verify", help="run invariant suites")
    v.add_argument("suites", nargs="*", default=["all"])
    v.add_argument("--quick", action="store_true", help="reduced sample sizes")
    v.add_argument("--out", type=Path, default=None, help="results JSON path")

    r = sub.add_parser("report", help="summarise the outputs of a run directory")
    r.add_argument("--run", required=True, type=Path)

    pl = sub.add_parser("run", help="run the pipeline from a YAML config")
    pl.add_argument("config", type=Path, nargs="?", default=_env("CONFIG", None))
    return p


def cmd_verify(args) -> int:
    from .verification import SUITES
    names = list(SUITES) if args.suites in ([], ["all"]) else args.suites
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        print(f"unknown suite: {', '.join(unknown)}; available: {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_USAGE
    results = []
    for n in names:
        res = SUITES[n](quick=args.quick)
        print(res.line(), flush=True)
        results.append(res)
    out = args.out or Path("verify_results.json")
    write_json(out, {"quick": args.quick, "suites": [r.as_dict() for r in results]})
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def cmd_report(args) -> int:
    d = Path(args.run)
    if not d.is_dir():
        raise UsageError(f"{d} is not a directory")
    summary = {}
    for name in ("run.json", "analysis.json", "dimension.json", "manifest.json"):
        p = d / name
        if p.exists():
            summary[name] = json.loads(p.read_text())
    cov = d / "covers.json"
    if cov.exists():
        data = json.loads(cov.read_text())
        summary["covers.json"] = {k: {"count": v["count"], "budget": v["budget"], "measured_c": v["measured_c"]}
                                  for k, v in data["families"].items()}
        summary["covers.json"]["bad_counts"] = data["bad_counts"]
    for name in ("energy.csv", "packets.csv", "estimates.csv", "dimension.csv"):
        p = d / name
        if p.exists():
            with open(p) as fh:
                summary[name] = {"rows": max(0, sum(1 for _ in fh) - 1)}
    est = d / "estimates.csv"
    if est.exists():
        with open(est) as fh:
            rows = list(csv.DictReader(fh))
        cs = [float(r["measured_c"]) for r in rows if r.get("measured_c") not in (None, "", "nan")]
        cs = [c for c in cs if math.isfinite(c)]
        if cs:
            summary["estimates.csv"]["measured_c_max"] = max(cs)
    write_json(d / "report.json", summary)
    print(json.dumps(summary, indent=2, sort_keys=True, default=_json_default)[:4000])
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    set_workers(args.threads)
    try:
        if args.command == "solve":
            paths = stage_solve(args.out, args.alpha, args.n, args.dt, args.t_end, args.ic, args.seed,
                                args.scheme, args.dealias, args.period, args.snapshot_every)
        elif args.command == "analyze":
            paths = stage_analyze(args.run, args.bands, args.cubes, args.seed, args.epsilon)
        elif args.command == "cover":
            paths = stage_cover(args.run, args.j, args.eta, args.window, args.k_max, args.epsilon,
                                args.test_points, args.seed)
        elif args.command == "dimension":
            paths = stage_dimension(args.covers, args.alpha, args.scales, provenance=args.provenance)
        elif args.command == "verify":
            return cmd_verify(args)
        elif args.command == "report":
            return cmd_report(args)
        else:
            if args.config is None:
                raise UsageError("run needs a config path (or PKRG_CONFIG)")
            man = run_pipeline(args.config)
            for st in man.stages:
                print(f"{st.name}: {len(st.artifacts)} artifacts in {st.seconds:.1f}s")
            return EXIT_OK
        for p in paths:
            print(p)
        return EXIT_OK
    except (ConfigError, UsageError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc.cause, (ConfigError, UsageError)) else EXIT_NUMERIC
    except (BlowUpError, BarrierNotFoundError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, PkrgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
