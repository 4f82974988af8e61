"""Command line harness.

    python -m fchc COMMAND (--config PATH | --preset NAME) [--out DIR]
                   [--seed N] [--override key=value ...]

Commands: simulate, linearize, adjoint, grad-check, optimize, convergence,
selftest. Exit codes: 0 success, 2 configuration error, 3 solver error,
4 selftest failure. ``FCHC_THREADS`` caps the number of worker threads.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import convergence_study, frechet_remainder, gradient_check, run_all
from .config import ExperimentConfig, config_from_dict, load_config
from .errors import ConfigError, ParseError, SolverError
from .io import write_field, write_manifest, write_series
from .optimize import optimize, reduced_cost, variational_inequality_residual
from .presets import PRESETS, preset_dict
from .sensitivity import (
    STABILIZED,
    adjoint_identity_residual,
    mean_split_residual,
    solve_adjoint,
    solve_linearized,
)
from .spectral import random_smooth
from .state import dissipation_report, energy, solve_state

log = logging.getLogger("fchc")

COMMANDS = ("simulate", "linearize", "adjoint", "grad-check", "optimize", "convergence", "selftest")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_SELFTEST = 0, 2, 3, 4


@dataclass
class RunManifest:
    command: str
    config_hash: str
    version: str
    seed: int
    wall_time: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    passed: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def worker_count() -> int:
    raw = os.environ.get("FCHC_THREADS")
    cap = os.cpu_count() or 1
    if raw is None:
        return cap
    try:
        value = int(raw)
    except ValueError:
        raise ParseError(f"FCHC_THREADS must be an integer, got {raw!r}", field="FCHC_THREADS")
    return max(1, min(value, cap))


class _Writer:
    def __init__(self, out: Path, shape):
        self.out = out
        self.shape = shape
        self.files = []
        out.mkdir(parents=True, exist_ok=True)

    def field(self, name, values):
        write_field(self.out / name, values, self.shape)
        self.files.append(name)

    def series(self, name, columns):
        write_series(self.out / name, columns)
        self.files.append(name)


def _state_series(model, traj):
    dom = model.domain
    return {
        "time": model.grid.nodes,
        "energy": energy(model, traj.y),
        "mass": dom.mean(traj.y),
        "newton": np.concatenate([[0], traj.newton_iterations]),
    }


def _simulate(cfg: ExperimentConfig, w: _Writer, workers: int) -> dict:
    model = cfg.model()
    traj = solve_state(model, cfg.control(), cfg.y0())
    w.field("y.fchc", traj.y)
    w.field("mu.fchc", traj.mu)
    w.series("series.csv", _state_series(model, traj))
    inc = dissipation_report(model, traj)
    diag = {
        "newton_iterations": traj.newton_iterations.tolist(),
        "max_newton_iterations": int(traj.newton_iterations.max(initial=0)),
        "gb": traj.gb.as_dict(),
        "max_energy_increment": float(inc.max()),
        "mass_drift": float(np.max(np.abs(model.domain.mean(traj.y) - model.domain.mean(traj.y[0])))),
    }
    return diag


def _direction(cfg: ExperimentConfig):
    return cfg.time_field(cfg.data["linearize"]["direction"], "linearize.direction")


def _linearize(cfg: ExperimentConfig, w: _Writer, workers: int) -> dict:
    model = cfg.model()
    u, y0 = cfg.control(), cfg.y0()
    state = solve_state(model, u, y0)
    k = _direction(cfg)
    scheme = cfg.data["linearize"]["scheme"]
    lin = solve_linearized(model, state, k, scheme)
    w.field("xi.fchc", lin.xi)
    w.field("eta.fchc", lin.eta)
    diag = {"scheme": scheme, "xi_max_norm": float(np.max(model.domain.norm(lin.xi)))}
    if scheme == STABILIZED:
        diag["c_hat"] = lin.c_hat
    else:
        eps = 1e-2 * max(1.0, float(np.max(np.abs(u)))) / max(float(np.max(np.abs(k))), 1e-300)
        r1 = frechet_remainder(model, y0, u, k, eps, state, lin)
        r2 = frechet_remainder(model, y0, u, k, eps / 2, state, lin)
        diag.update({"frechet_eps": eps, "frechet_remainders": [r1, r2], "frechet_ratio": r1 / r2})
    return diag


def _adjoint(cfg: ExperimentConfig, w: _Writer, workers: int) -> dict:
    model = cfg.model()
    state = solve_state(model, cfg.control(), cfg.y0())
    cost = cfg.cost()
    adj = solve_adjoint(model, state, cost)
    w.field("p.fchc", adj.p)
    w.field("q.fchc", adj.q)
    rng = np.random.default_rng(cfg.seed)
    k = rng.standard_normal(adj.q.shape)
    lin = solve_linearized(model, state, k)
    dom = model.domain
    diag = {
        "duality_residual": adjoint_identity_residual(model, lin, adj, k),
        "terminal_residual": float(dom.norm(adj.p_terminal + model.config.tau * adj.q_terminal - adj.g1)),
    }
    if adj.p_mean is not None:
        diag["max_abs_mean_q"] = float(np.max(np.abs(dom.mean(adj.q))))
        diag["mean_split_residual"] = mean_split_residual(model, adj)
        w.series("p_mean.csv", {"time": model.grid.nodes, "p_mean": adj.p_mean})
    return diag


def _grad_check(cfg: ExperimentConfig, w: _Writer, workers: int) -> dict:
    problem = cfg.problem()
    gc = cfg.data["grad_check"]
    rng = np.random.default_rng(cfg.seed)
    t = problem.model.grid.nodes[:, None]
    dirs = []
    for _ in range(gc["directions"]):
        shape = random_smooth(problem.model.basis_a, rng, (2,), 1.0)
        dirs.append(np.cos(np.pi * t) * shape[0] + np.sin(2 * np.pi * t) * shape[1])
    errors = gradient_check(problem, cfg.control(), dirs, tuple(gc["eps"]))
    w.series("grad_check.csv", {"direction": np.arange(len(errors)), "relative_error": errors})
    return {"relative_errors": errors, "max_relative_error": max(errors), "tol": gc["tol"], "passed": max(errors) <= gc["tol"]}


def _optimize(cfg: ExperimentConfig, w: _Writer, workers: int) -> dict:
    problem = cfg.problem()
    opts = cfg.data["optimize"]
    report = optimize(problem, cfg.control(), max_iter=opts["max_iter"], stat_tol=opts["stat_tol"])
    state = solve_state(problem.model, report.control, problem.y0)
    w.field("u.fchc", report.control)
    w.field("y.fchc", state.y)
    stats = report.stationarity_history
    w.series(
        "series.csv",
        {"iteration": np.arange(len(report.costs)), "cost": report.costs, "stationarity": stats[: len(report.costs)]},
    )
    g = solve_adjoint(problem.model, state, problem.cost).q + problem.cost.alpha3 * report.control
    diag = report.as_dict()
    diag["final_cost"] = reduced_cost(problem, report.control, state)
    diag["vi_residual"] = variational_inequality_residual(problem, report.control, g, rng=cfg.seed)
    return diag


def _convergence(cfg: ExperimentConfig, w: _Writer, workers: int) -> dict:
    conv = cfg.data["convergence"]
    cfg.basis_a, cfg.basis_b, cfg.potential  # build shared pieces before threads start

    def setup(steps):
        return cfg.model(steps), cfg.control(steps), cfg.y0(), cfg.cost(steps)

    study = convergence_study(tuple(conv["levels"]), conv["reference"], cfg.seed, workers, setup)
    w.series(
        "convergence.csv",
        {"steps": study["levels"], "state_error": study["state_errors"], "adjoint_error": study["adjoint_errors"]},
    )
    return study


def _selftest(cfg, w: _Writer, workers: int, seed: int = 0) -> dict:
    results = run_all(seed=seed, workers=workers)
    for res in results:
        print(res.line())
    w.series(
        "selftest.csv",
        {
            "criterion": [r.number for r in results],
            "passed": [int(r.passed) for r in results],
            "value": [r.value for r in results],
            "seconds": [r.seconds for r in results],
        },
    )
    return {"results": {str(r.number): {"name": r.name, "passed": r.passed, "value": r.value} for r in results}}


_HANDLERS = {
    "simulate": _simulate,
    "linearize": _linearize,
    "adjoint": _adjoint,
    "grad-check": _grad_check,
    "optimize": _optimize,
    "convergence": _convergence,
}


def run(command: str, cfg: ExperimentConfig | None = None, out=None) -> RunManifest:
    """Execute ``command`` and write its outputs plus ``manifest.json``."""
    if command not in COMMANDS:
        raise ParseError(f"unknown command {command!r}", field="command")
    start = time.perf_counter()
    workers = worker_count()
    if cfg is None:
        cfg = config_from_dict(preset_dict("example2_regular"))
    out = Path(out) if out is not None else cfg.output
    seed = cfg.seed
    w = _Writer(out, cfg.domain.shape)
    if command == "selftest":
        diag = _selftest(cfg, w, workers, seed)
        passed = all(v["passed"] for v in diag["results"].values())
    else:
        diag = _HANDLERS[command](cfg, w, workers)
        passed = bool(diag.get("passed", True))
    manifest = RunManifest(command, cfg.config_hash, __version__, seed, diagnostics=diag, files=list(w.files))
    manifest.passed = passed
    manifest.wall_time = time.perf_counter() - start
    write_manifest(out / "manifest.json", manifest.to_dict())
    return manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fchc", description="Fractional viscous Cahn-Hilliard control toolkit")
    parser.add_argument("command", choices=COMMANDS)
    src = parser.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="JSON experiment configuration")
    src.add_argument("--preset", choices=sorted(PRESETS), help="use a shipped configuration")
    parser.add_argument("--out", type=Path, help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="random seed (overrides the config)")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="dotted-path override")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.override)
    if args.seed is not None:
        if args.seed < 0:
            print("error: --seed must be nonnegative", file=sys.stderr)
            return EXIT_CONFIG
        overrides.append(f"seed={args.seed}")
    try:
        if args.config is not None:
            cfg = load_config(args.config, overrides)
        elif args.preset is not None:
            cfg = config_from_dict(preset_dict(args.preset), overrides=overrides)
        elif args.command == "selftest":
            cfg = config_from_dict(preset_dict("example2_regular"), overrides=overrides)
        else:
            raise ParseError("either --config or --preset is required")
        manifest = run(args.command, cfg, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.command == "selftest" and not manifest.passed:
        return EXIT_SELFTEST
    out = args.out if args.out is not None else cfg.output
    print(f"{args.command}: wrote {len(manifest.files) + 1} files to {out} ({manifest.wall_time:.2f}s)")
    return EXIT_OK
