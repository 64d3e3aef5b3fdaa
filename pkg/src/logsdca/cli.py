"""Command-line surface: simulation, fitting, rate reports, solver comparison.

Only long flags are accepted.  Every option can also come from a TOML file
(one table per subcommand) passed with --config; explicit flags win over the
file, which wins over built-in defaults.  Exit codes: 0 success, 1 bad
configuration, 2 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .baselines import BaselineOptions, newton_fit, nolips_fit
from .hawkes import (
    HawkesModel,
    fit_hawkes,
    hawkes_simulate,
    load_hawkes_json,
    save_hawkes_json,
)
from .logsmooth import sigma_coeffs
from .objectives import RegularizerSpec
from .poisson import (
    RawPoissonData,
    default_reg_level,
    load_poisson_file,
    poisson_prepare,
    poisson_simulate,
    write_poisson_csv,
)
from .sdca import SolveOptions, beta_bounds, heuristic_init, solve

__all__ = ["run", "main"]


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports errors instead of exiting the process."""

    def error(self, message):
        raise _CliError(message)


_DEFAULTS = {
    "simulate-poisson": {
        "rows": 1000,
        "features": 100,
        "nnz": 30,
        "seed": 0,
        "lambda0": None,
        "out_dir": ".",
    },
    "simulate-hawkes": {
        "nodes": 2,
        "kernels": 2,
        "decays": None,
        "horizon": 1000.0,
        "seed": 0,
        "inhibition": False,
        "model": None,
        "out_dir": ".",
    },
    "fit": {
        "model": "poisson",
        "data": None,
        "solver": "sdca",
        "init": "heuristic",
        "sampling": "uniform",
        "batch_size": 1,
        "tol": 1e-10,
        "max_epochs": 200,
        "seed": 0,
        "lambda0": None,
        "scale": "minmax",
        "header": False,
        "trace": None,
        "out": None,
        "step_size": None,
    },
    "rates": {
        "data": None,
        "lambda0": None,
        "scale": "minmax",
        "header": False,
        "tol": 1e-12,
        "max_epochs": 2000,
        "proxy": False,
        "out": None,
    },
    "compare": {
        "model": "poisson",
        "data": None,
        "solvers": "sdca,newton,nolips",
        "tol": 1e-10,
        "max_epochs": 200,
        "seed": 0,
        "lambda0": None,
        "scale": "minmax",
        "header": False,
        "out_dir": ".",
    },
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="logsdca", allow_abbrev=False)
    parser.add_argument("--config", type=str, default=None)
    sub = parser.add_subparsers(dest="command")

    sp = sub.add_parser("simulate-poisson", allow_abbrev=False)
    sp.add_argument("--rows", type=int)
    sp.add_argument("--features", type=int)
    sp.add_argument("--nnz", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--lambda0", type=float)
    sp.add_argument("--out-dir", dest="out_dir", type=str)

    sh = sub.add_parser("simulate-hawkes", allow_abbrev=False)
    sh.add_argument("--nodes", type=int)
    sh.add_argument("--kernels", type=int)
    sh.add_argument("--decays", type=str)
    sh.add_argument("--horizon", type=float)
    sh.add_argument("--seed", type=int)
    sh.add_argument("--inhibition", action="store_const", const=True)
    sh.add_argument("--model", type=str)
    sh.add_argument("--out-dir", dest="out_dir", type=str)

    ft = sub.add_parser("fit", allow_abbrev=False)
    ft.add_argument("--model", type=str, choices=["poisson", "hawkes"])
    ft.add_argument("--data", type=str)
    ft.add_argument("--solver", type=str, choices=["sdca", "newton", "nolips"])
    ft.add_argument("--init", type=str, choices=["ones", "heuristic"])
    ft.add_argument("--sampling", type=str, choices=["uniform", "importance"])
    ft.add_argument("--batch-size", dest="batch_size", type=int)
    ft.add_argument("--tol", type=float)
    ft.add_argument("--max-epochs", dest="max_epochs", type=int)
    ft.add_argument("--seed", type=int)
    ft.add_argument("--lambda0", type=float)
    ft.add_argument("--scale", type=str, choices=["minmax", "none"])
    ft.add_argument("--header", action="store_const", const=True)
    ft.add_argument("--trace", type=str)
    ft.add_argument("--out", type=str)
    ft.add_argument("--step-size", dest="step_size", type=float)

    rt = sub.add_parser("rates", allow_abbrev=False)
    rt.add_argument("--data", type=str)
    rt.add_argument("--lambda0", type=float)
    rt.add_argument("--scale", type=str, choices=["minmax", "none"])
    rt.add_argument("--header", action="store_const", const=True)
    rt.add_argument("--tol", type=float)
    rt.add_argument("--max-epochs", dest="max_epochs", type=int)
    rt.add_argument("--proxy", action="store_const", const=True)
    rt.add_argument("--out", type=str)

    cp = sub.add_parser("compare", allow_abbrev=False)
    cp.add_argument("--model", type=str, choices=["poisson", "hawkes"])
    cp.add_argument("--data", type=str)
    cp.add_argument("--solvers", type=str)
    cp.add_argument("--tol", type=float)
    cp.add_argument("--max-epochs", dest="max_epochs", type=int)
    cp.add_argument("--seed", type=int)
    cp.add_argument("--lambda0", type=float)
    cp.add_argument("--scale", type=str, choices=["minmax", "none"])
    cp.add_argument("--header", action="store_const", const=True)
    cp.add_argument("--out-dir", dest="out_dir", type=str)

    return parser


def _merge_config(command: str, flags: dict, config_path: str | None) -> dict:
    merged = dict(_DEFAULTS[command])
    if config_path is not None:
        with open(config_path, "rb") as fh:
            table = tomllib.load(fh)
        section = table.get(command, {})
        for key, value in section.items():
            key = key.replace("-", "_")
            if key not in merged:
                raise _CliError(f"unknown option {key!r} in config [{command}]")
            merged[key] = value
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def _load_prepared(cfg: dict, solvers: tuple = ()):
    if cfg["data"] is None:
        raise _CliError("--data is required")
    X, y = load_poisson_file(cfg["data"], header=bool(cfg["header"]))
    lam0 = cfg["lambda0"]
    if lam0 is None:
        lam0 = default_reg_level(X)
    scale = cfg["scale"]
    if "nolips" in solvers and scale != "minmax":
        # NoLips iterates live in the positive orthant; min-max scaling is
        # forced so that the orthant is feasible.
        print("note: forcing min-max scaling for the NoLips run", file=sys.stderr)
        scale = "minmax"
    raw = RawPoissonData(features=X, labels=y, lam0=lam0)
    return poisson_prepare(raw, scale=scale)


def _cmd_simulate_poisson(cfg: dict) -> int:
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    raw, w_true = poisson_simulate(
        cfg["rows"], cfg["features"], cfg["nnz"], seed=cfg["seed"], lam0=cfg["lambda0"]
    )
    data_path = out_dir / "poisson.csv"
    truth_path = out_dir / "poisson_truth.json"
    write_poisson_csv(data_path, raw.features, raw.labels)
    with open(truth_path, "w") as fh:
        json.dump({"w": w_true.tolist(), "lambda0": raw.lam0}, fh)
    positives = int(np.count_nonzero(raw.labels > 0))
    print(
        f"simulated {raw.labels.size} rows ({positives} positive labels), "
        f"{cfg['features']} features -> {data_path}"
    )
    return 0


def _random_hawkes_model(cfg: dict) -> HawkesModel:
    """Seeded random model with spectral radius 0.6, optionally one inhibitory block."""
    rng = np.random.default_rng(cfg["seed"])
    I, U = cfg["nodes"], cfg["kernels"]
    if cfg["decays"] is not None:
        decays = np.array([float(t) for t in str(cfg["decays"]).split(",")])
        if decays.size != U:
            raise _CliError("--decays must list one value per kernel")
    else:
        decays = np.logspace(0, 1, U)
    adjacency = rng.uniform(0.1, 1.0, size=(I, I, U))
    if cfg["inhibition"]:
        i, j = (0, 1) if I > 1 else (0, 0)
        adjacency[i, j, :] *= -1.0
    aggregate = adjacency.sum(axis=2)
    radius = float(np.max(np.abs(np.linalg.eigvals(np.abs(aggregate)))))
    adjacency *= 0.6 / radius
    mu = rng.uniform(0.3, 0.7, size=I)
    return HawkesModel(mu=mu, adjacency=adjacency, decays=decays)


def _cmd_simulate_hawkes(cfg: dict) -> int:
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg["model"] is not None:
        with open(cfg["model"]) as fh:
            model = HawkesModel.from_dict(json.load(fh))
    else:
        model = _random_hawkes_model(cfg)
    data = hawkes_simulate(model, cfg["horizon"], seed=cfg["seed"])
    events_path = out_dir / "hawkes_events.json"
    model_path = out_dir / "hawkes_model.json"
    save_hawkes_json(events_path, data)
    with open(model_path, "w") as fh:
        json.dump(model.to_dict(), fh)
    counts = [int(t.size) for t in data.events]
    print(
        f"simulated {sum(counts)} events over T={data.horizon:g} "
        f"(per node: {counts}) -> {events_path}"
    )
    return 0


def _solver_options(cfg: dict) -> SolveOptions:
    return SolveOptions(
        sampling=cfg.get("sampling", "uniform"),
        batch_size=cfg.get("batch_size", 1),
        init=cfg.get("init", "heuristic"),
        tol=cfg["tol"],
        max_epochs=cfg["max_epochs"],
        seed=cfg.get("seed", 0),
    )


def _fit_poisson_one(cfg: dict, solver: str, data):
    reg = RegularizerSpec()
    if solver == "sdca":
        result = solve(data, reg, _solver_options(cfg))
        return result.state.w, result.trace, result.to_dict()
    opts = BaselineOptions(
        max_iters=cfg["max_epochs"],
        tol=cfg["tol"],
        step_size=cfg.get("step_size"),
    )
    fit = newton_fit if solver == "newton" else nolips_fit
    result = fit(data, reg, opts)
    payload = {
        "w": result.w.tolist(),
        "iterations": result.iterations,
        "converged": result.converged,
        "primal": result.trace.records[-1].primal,
    }
    return result.w, result.trace, payload


def _cmd_fit(cfg: dict) -> int:
    if cfg["model"] == "poisson":
        data = _load_prepared(cfg, solvers=(cfg["solver"],))
        _, trace, payload = _fit_poisson_one(cfg, cfg["solver"], data)
        if cfg["trace"]:
            trace.to_csv(cfg["trace"])
        if cfg["out"]:
            with open(cfg["out"], "w") as fh:
                json.dump(payload, fh)
        primal = payload.get("primal")
        print(
            f"fit poisson with {cfg['solver']}: "
            f"final objective {primal if primal is not None else 'undefined'}"
        )
        return 0

    if cfg["data"] is None:
        raise _CliError("--data is required")
    events = load_hawkes_json(cfg["data"])
    if cfg["solver"] == "sdca":
        model, results = fit_hawkes(
            events, solver="sdca", lam=cfg["lambda0"], solve_options=_solver_options(cfg)
        )
    else:
        bopts = BaselineOptions(
            max_iters=cfg["max_epochs"], tol=cfg["tol"], step_size=cfg.get("step_size")
        )
        model, results = fit_hawkes(
            events, solver=cfg["solver"], lam=cfg["lambda0"], baseline_options=bopts
        )
    if cfg["out"]:
        with open(cfg["out"], "w") as fh:
            json.dump(model.to_dict(), fh)
    if cfg["trace"]:
        base = Path(cfg["trace"])
        for i, res in enumerate(results):
            if res is None:
                continue
            res.trace.to_csv(base.with_suffix(f".node{i}{base.suffix}"))
    print(
        f"fit hawkes with {cfg['solver']}: aggregate adjacency range "
        f"[{model.aggregate().min():+.4f}, {model.aggregate().max():+.4f}]"
    )
    return 0


def _cmd_rates(cfg: dict) -> int:
    data = _load_prepared(cfg)
    beta = beta_bounds(data)
    if cfg["proxy"]:
        alpha_star = np.minimum(heuristic_init(data), beta)
    else:
        opts = SolveOptions(tol=cfg["tol"], max_epochs=cfg["max_epochs"])
        result = solve(data, RegularizerSpec(), opts)
        alpha_star = np.minimum(result.state.alpha, beta)
    report = sigma_coeffs(data, alpha_star, beta)
    payload = report.to_dict()
    if cfg["out"]:
        with open(cfg["out"], "w") as fh:
            json.dump(payload, fh)
    print(
        f"rates: min sigma {report.sigma.min():.3e}, "
        f"sigma_bar {report.sigma_bar:.3e}, max R {report.R.max():.3e}"
    )
    return 0


def _cmd_compare(cfg: dict) -> int:
    solvers = [s.strip() for s in cfg["solvers"].split(",") if s.strip()]
    unknown = set(solvers) - {"sdca", "newton", "nolips"}
    if unknown:
        raise _CliError(f"unknown solvers: {sorted(unknown)}")
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    data = _load_prepared(cfg, solvers=tuple(solvers))
    summary = {}
    rows = []
    for solver in solvers:
        _, trace, payload = _fit_poisson_one(cfg, solver, data)
        trace.to_csv(out_dir / f"trace_{solver}.csv")
        final = trace.records[-1]
        elapsed = final.time_s
        primal = final.primal
        summary[solver] = {
            "final_objective": primal,
            "time_s": elapsed,
            "records": len(trace),
        }
        rows.append((solver, primal, elapsed))
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh)
    print(f"{'solver':<10}{'objective':>20}{'time_s':>12}")
    for solver, primal, elapsed in rows:
        obj = "undefined" if primal is None else f"{primal:.12f}"
        print(f"{solver:<10}{obj:>20}{elapsed:>12.3f}")
    return 0


_COMMANDS = {
    "simulate-poisson": _cmd_simulate_poisson,
    "simulate-hawkes": _cmd_simulate_hawkes,
    "fit": _cmd_fit,
    "rates": _cmd_rates,
    "compare": _cmd_compare,
}


def run(argv: list[str]) -> int:
    """Parse argv and execute; returns the process exit code."""
    parser = _build_parser()
    try:
        namespace = parser.parse_args(argv)
        if namespace.command is None:
            raise _CliError("a subcommand is required")
        flags = {
            k: v
            for k, v in vars(namespace).items()
            if k not in ("command", "config")
        }
        cfg = _merge_config(namespace.command, flags, namespace.config)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[namespace.command](cfg)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # solver failures map to exit code 2
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))
