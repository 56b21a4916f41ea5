"""Config-driven experiment runner: sweeps, trace CSVs, and the run manifest.

A JSON config describes one experiment; list-valued knobs expand to the
Cartesian product of cells over (d, kappa, lambda, outlier fraction, method,
seed). Each cell runs one solve and writes one trace CSV; a manifest ties
the cells to their files and summary numbers. CSV bodies are deterministic
functions of the config so reruns are byte-identical; wall-clock timings are
therefore left out of the CSVs unless explicitly requested.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass
from pathlib import Path

from .model import generate_ground_truth, materialize
from .objective import LossContext
from .sensing import corrupt, forward, make_gaussian_ensemble
from .solver import SolverConfig, Trace, run

_CSV_HEADER = "iter,loss,step_size,rel_error,dist_estimate,wall_ms"

# Dense ensembles above this many stored doubles switch to regenerate mode.
_DENSE_BUDGET = 60_000_000


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def trace_csv(trace: Trace, include_wall_ms: bool = False) -> str:
    """Render a trace as CSV; floats keep 17 significant digits."""
    lines = [_CSV_HEADER]
    for rec in trace.records:
        dist = "" if rec.dist_estimate is None else _fmt(rec.dist_estimate)
        wall = _fmt(rec.wall_ms) if include_wall_ms else ""
        lines.append(f"{rec.t},{_fmt(rec.loss)},{_fmt(rec.step_size)},"
                     f"{_fmt(rec.rel_error)},{dist},{wall}")
    return "\n".join(lines) + "\n"


_PROBLEM_FIELDS = {"m", "n", "r", "d", "kappa", "outlier_fraction",
                   "amplitude", "p", "normalize", "ensemble_mode"}
_SOLVER_FIELDS = {"lambda", "method", "step_policy", "eta0", "q", "init",
                  "truncation_quantile", "init_split", "init_sv_threshold",
                  "regauge_every", "pinv_cutoff"}
_RUN_FIELDS = {"seeds", "max_iters", "rel_err_stop", "dist_every",
               "record_wall_ms"}
_OUTPUT_FIELDS = {"directory", "tag"}


@dataclass(frozen=True)
class ExperimentConfig:
    m: int
    n: int
    r: int
    d_values: tuple
    kappa_values: tuple
    lambda_values: tuple
    fraction_values: tuple
    methods: tuple
    seeds: tuple
    amplitude: float = 10.0
    p_rule: object = "8nr"            # explicit int or the string "8nr"
    normalize: bool = False
    ensemble_mode: str = "auto"       # auto | dense | regenerate
    step_policy: str = "polyak"
    eta0: float = 0.1
    q: float = 0.97
    init: str = "spectral"
    truncation_quantile: float | None = None
    init_split: str = "ridge"
    init_sv_threshold: float | None = 1.25
    regauge_every: int = 100
    pinv_cutoff: float = 1e-12
    max_iters: int = 2000
    rel_err_stop: float = 1e-12
    dist_every: int = 0
    record_wall_ms: bool = False
    directory: str = "runs"
    tag: str = "experiment"

    @property
    def p(self) -> int:
        if self.p_rule == "8nr":
            return 8 * self.n * self.r
        return int(self.p_rule)

    def cells(self):
        """Cartesian product of (d, kappa, lambda, fraction, method, seed)."""
        return list(itertools.product(self.d_values, self.kappa_values,
                                      self.lambda_values, self.fraction_values,
                                      self.methods, self.seeds))


def _as_tuple(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


def _reject_unknown(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ValueError(f"unknown field(s) in {where}: {sorted(unknown)}")


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate and normalize a JSON config document."""
    _reject_unknown(doc, {"problem", "solver", "run", "output"}, "config")
    problem = doc.get("problem", {})
    solver = doc.get("solver", {})
    run_block = doc.get("run", {})
    output = doc.get("output", {})
    _reject_unknown(problem, _PROBLEM_FIELDS, "problem")
    _reject_unknown(solver, _SOLVER_FIELDS, "solver")
    _reject_unknown(run_block, _RUN_FIELDS, "run")
    _reject_unknown(output, _OUTPUT_FIELDS, "output")

    for key in ("m", "n", "r"):
        if key not in problem:
            raise ValueError(f"problem block is missing {key!r}")
    p_rule = problem.get("p", "8nr")
    if p_rule != "8nr":
        p_rule = int(p_rule)

    cfg = ExperimentConfig(
        m=int(problem["m"]), n=int(problem["n"]), r=int(problem["r"]),
        d_values=_as_tuple(problem.get("d", problem["r"])),
        kappa_values=_as_tuple(problem.get("kappa", 1.0)),
        lambda_values=_as_tuple(solver.get("lambda", 2.0)),
        fraction_values=_as_tuple(problem.get("outlier_fraction", 0.0)),
        methods=_as_tuple(solver.get("method", "opsa")),
        seeds=tuple(run_block.get("seeds", [0])),
        amplitude=float(problem.get("amplitude", 10.0)),
        p_rule=p_rule,
        normalize=bool(problem.get("normalize", False)),
        ensemble_mode=str(problem.get("ensemble_mode", "auto")),
        step_policy=str(solver.get("step_policy", "polyak")),
        eta0=float(solver.get("eta0", 0.1)),
        q=float(solver.get("q", 0.97)),
        init=str(solver.get("init", "spectral")),
        truncation_quantile=solver.get("truncation_quantile"),
        init_split=str(solver.get("init_split", "ridge")),
        init_sv_threshold=solver.get("init_sv_threshold", 1.25),
        regauge_every=int(solver.get("regauge_every", 100)),
        pinv_cutoff=float(solver.get("pinv_cutoff", 1e-12)),
        max_iters=int(run_block.get("max_iters", 2000)),
        rel_err_stop=float(run_block.get("rel_err_stop", 1e-12)),
        dist_every=int(run_block.get("dist_every", 0)),
        record_wall_ms=bool(run_block.get("record_wall_ms", False)),
        directory=str(output.get("directory", "runs")),
        tag=str(output.get("tag", "experiment")),
    )
    if not cfg.cells():
        raise ValueError("config expands to no cells")
    return cfg


def emit_config(cfg: ExperimentConfig) -> dict:
    """Inverse of parse_config up to value normalization."""
    return {
        "problem": {
            "m": cfg.m, "n": cfg.n, "r": cfg.r, "d": list(cfg.d_values),
            "kappa": list(cfg.kappa_values),
            "outlier_fraction": list(cfg.fraction_values),
            "amplitude": cfg.amplitude, "p": cfg.p_rule,
            "normalize": cfg.normalize, "ensemble_mode": cfg.ensemble_mode,
        },
        "solver": {
            "lambda": list(cfg.lambda_values), "method": list(cfg.methods),
            "step_policy": cfg.step_policy, "eta0": cfg.eta0, "q": cfg.q,
            "init": cfg.init, "truncation_quantile": cfg.truncation_quantile,
            "init_split": cfg.init_split,
            "init_sv_threshold": cfg.init_sv_threshold,
            "regauge_every": cfg.regauge_every, "pinv_cutoff": cfg.pinv_cutoff,
        },
        "run": {
            "seeds": list(cfg.seeds), "max_iters": cfg.max_iters,
            "rel_err_stop": cfg.rel_err_stop, "dist_every": cfg.dist_every,
            "record_wall_ms": cfg.record_wall_ms,
        },
        "output": {"directory": cfg.directory, "tag": cfg.tag},
    }


def _cell_name(tag, method, d, kappa, lam, fraction, seed) -> str:
    def num(x):
        return f"{x:g}".replace(".", "p").replace("-", "m")
    return (f"{tag}_{method}_d{d}_k{num(kappa)}_lam{num(lam)}"
            f"_f{num(fraction)}_s{seed}")


def run_cell(cfg: ExperimentConfig, d, kappa, lam, fraction, method, seed) -> Trace:
    gt = generate_ground_truth(cfg.m, cfg.n, cfg.r, int(d), float(kappa),
                               int(seed), normalize=cfg.normalize)
    mode = cfg.ensemble_mode
    if mode == "auto":
        mode = "dense" if cfg.p * cfg.m * cfg.n <= _DENSE_BUDGET else "regenerate"
    ens = make_gaussian_ensemble(cfg.m, cfg.n, cfg.p, int(seed), mode=mode)
    y_clean = forward(ens, materialize(gt))
    meas = corrupt(y_clean, float(fraction), int(seed), amplitude=cfg.amplitude)
    ctx = LossContext(ensemble=ens, meas=meas)
    solver_cfg = SolverConfig(
        lam=float(lam), method=str(method), step_policy=cfg.step_policy,
        eta0=cfg.eta0, q=cfg.q, init=cfg.init,
        truncation_quantile=cfg.truncation_quantile,
        init_split=cfg.init_split, init_sv_threshold=cfg.init_sv_threshold,
        regauge_every=cfg.regauge_every, max_iters=cfg.max_iters,
        rel_err_stop=cfg.rel_err_stop, dist_every=cfg.dist_every,
        pinv_cutoff=cfg.pinv_cutoff, seed=int(seed),
    )
    return run(gt, ctx, solver_cfg)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Execute every cell, write trace CSVs, and return the manifest.

    Failed cells are recorded with their error and do not abort the sweep;
    the manifest is written last, after all cells settle.
    """
    outdir = Path(cfg.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    cells = []
    for d, kappa, lam, fraction, method, seed in cfg.cells():
        name = _cell_name(cfg.tag, method, d, kappa, lam, fraction, seed)
        path = outdir / f"{name}.csv"
        entry = {
            "d": int(d), "kappa": float(kappa), "lambda": float(lam),
            "outlier_fraction": float(fraction), "method": str(method),
            "seed": int(seed), "file": path.name,
        }
        try:
            trace = run_cell(cfg, d, kappa, lam, fraction, method, seed)
            path.write_text(trace_csv(trace, include_wall_ms=cfg.record_wall_ms))
            entry.update(
                status="ok",
                reason=trace.reason,
                final_rel_error=float(trace.records[-1].rel_error),
                iters_to_stop=int(trace.records[-1].t),
                iters_to_target=trace.iterations_to(cfg.rel_err_stop),
            )
        except Exception as exc:   # noqa: BLE001 - cell isolation is the point
            entry.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        cells.append(entry)

    manifest = {
        "tag": cfg.tag,
        "created_unix": time.time(),
        "p": cfg.p,
        "config": emit_config(cfg),
        "cells": cells,
    }
    (outdir / f"{cfg.tag}_manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n")
    return manifest
