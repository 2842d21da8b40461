"""Command-line front end.

Subcommands: run, sweep, sensitivity, dump-cov, validate-config.  Configs are
TOML files whose top-level keys mirror ExperimentConfig (plus optional
[seeds], [sweep] and [sensitivity] tables); unknown keys are config errors.
Data goes to files under the output root (--output, else $MESHENKF_OUTPUT_ROOT,
else ./runs); progress goes to stderr, stdout stays clean.  Exit codes:
0 success, 1 runtime failure, 2 usage error, 3 config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .enkf import FilterDegeneracyError
from .experiment import (
    ExperimentConfig,
    RunRecord,
    SweepResult,
    build_model_spec,
    config_from_dict,
    run_twin,
    sensitivity_suite,
    sweep,
)
from .mesh import RemeshError
from .metrics import covariance_blocks
from .models import SolverBlowUpError

OUTPUT_ROOT_ENV = "MESHENKF_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3


class ConfigError(ValueError):
    pass


def _progress(msg: str):
    print(f"[meshenkf] {msg}", file=sys.stderr)


def _fail(category: str, message: str) -> None:
    print(f"error: {category}: {message}", file=sys.stderr)


# --- config loading ---------------------------------------------------------


def load_config_file(path: str):
    """Parse a TOML config into (ExperimentConfig, sweep table, sensitivity table)."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"invalid TOML in {path}: {err}") from None

    sweep_table = data.pop("sweep", {})
    sens_table = data.pop("sensitivity", {})
    if not isinstance(sweep_table, dict) or not isinstance(sens_table, dict):
        raise ConfigError("[sweep] and [sensitivity] must be tables")
    unknown = set(sweep_table) - {"alpha_grid", "alpha_j_grid", "jobs"}
    if unknown:
        raise ConfigError(f"unknown [sweep] keys: {sorted(unknown)}")
    unknown = set(sens_table) - {"experiment", "values", "schemes"}
    if unknown:
        raise ConfigError(f"unknown [sensitivity] keys: {sorted(unknown)}")

    try:
        config = config_from_dict(data)
    except (ValueError, TypeError) as err:
        raise ConfigError(str(err)) from None
    return config, sweep_table, sens_table


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.scheme is not None:
        changes["scheme"] = args.scheme
    if args.alpha is not None:
        changes["alpha"] = args.alpha
    if args.alpha_j is not None:
        changes["alpha_j"] = args.alpha_j
    if args.seed is not None:
        # a new master seed re-derives all six named seeds
        changes["master_seed"] = args.seed
        changes["seeds"] = None
    if not changes:
        return config
    try:
        return replace(config, **changes)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _check_grids(model: str, alpha_grid, alpha_j_grid):
    """Tuning grids must stay inside the documented parameter ranges."""
    a = np.atleast_1d(np.asarray(alpha_grid, dtype=float))
    aj = np.atleast_1d(np.asarray(alpha_j_grid, dtype=float))
    if a.size == 0 or aj.size == 0:
        raise ConfigError("sweep grids must be non-empty")
    if a.min() < 0.0 or a.max() > 1.6:
        raise ConfigError("alpha grid must lie within [0, 1.6]")
    aj_max = 0.1 if model == "bgm" else 0.5
    if aj.min() < 0.0 or aj.max() > aj_max:
        raise ConfigError(f"alpha_j grid must lie within [0, {aj_max}] for {model}")
    return a, aj


def validate_config(config: ExperimentConfig, sweep_table: dict):
    """All invariants checkable without running anything."""
    try:
        # tolerance positivity, delta2/delta1 >= 2, divisibility into L
        spec = build_model_spec(config)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    L = spec.tolerances.domain_length
    spacing = L / config.initial_mesh_size
    if not spec.tolerances.delta1 <= spacing <= spec.tolerances.delta2:
        raise ConfigError(
            f"initial_mesh_size={config.initial_mesh_size} gives node spacing "
            f"{spacing:.6g} outside [delta1, delta2]"
        )
    n = round(config.assim_interval / spec.dt)
    if abs(n * spec.dt - config.assim_interval) > 1e-9 * config.assim_interval:
        raise ConfigError("assim_interval is not a multiple of the model dt")
    if sweep_table:
        _check_grids(
            config.model,
            sweep_table.get("alpha_grid", [config.alpha]),
            sweep_table.get("alpha_j_grid", [config.alpha_j]),
        )


# --- output writing ---------------------------------------------------------


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _output_root(args) -> Path:
    if args.output is not None:
        return Path(args.output)
    env = os.environ.get(OUTPUT_ROOT_ENV)
    return Path(env) if env else Path("runs")


def _run_id(kind: str, config: ExperimentConfig, extra: dict | None = None) -> str:
    payload = {"kind": kind, "config": config.to_dict(), "extra": extra or {}}
    digest = hashlib.sha1(
        json.dumps(payload, sort_keys=True).encode()
    ).hexdigest()[:10]
    return f"{config.model}-{config.scheme}-{kind}-{digest}"


def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _write_json(path: Path, payload: dict):
    _atomic_write(path, json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n")


def _write_record(out_dir: Path, record: RunRecord):
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "record.json", record.to_dict())
    lines = ["time,phase,rmse_mean,rmse_derivative,spread"]
    for r in record.diagnostics:
        lines.append(
            f"{r.time!r},{r.phase},{r.rmse_mean!r},{r.rmse_derivative!r},{r.spread!r}"
        )
    _atomic_write(out_dir / "diagnostics.csv", "\n".join(lines) + "\n")


def _write_sweep_summary(out_dir: Path, result: SweepResult):
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["alpha,alpha_j,rmse,rmse_derivative,spread,failed,best"]
    for cell in result.cells:
        s = cell.record.analysis_summary
        best = int(
            cell.alpha == result.best_alpha and cell.alpha_j == result.best_alpha_j
        )
        lines.append(
            f"{cell.alpha!r},{cell.alpha_j!r},{s.rmse!r},{s.rmse_derivative!r},"
            f"{s.spread!r},{int(cell.record.failed)},{best}"
        )
    _atomic_write(out_dir / "sweep_summary.csv", "\n".join(lines) + "\n")


# --- subcommands -------------------------------------------------------------


def _cmd_run(args) -> int:
    config, sweep_table, _ = load_config_file(args.config)
    config = _apply_overrides(config, args)
    validate_config(config, sweep_table)
    out_dir = _output_root(args) / _run_id("run", config)
    _progress(f"run {config.model}/{config.scheme} -> {out_dir}")
    record = run_twin(config)
    _write_record(out_dir, record)
    if record.failed:
        _fail("runtime", record.failure_reason or "run failed")
        return EXIT_RUNTIME
    _progress(
        f"done: analysis rmse {record.analysis_summary.rmse:.6g} "
        f"({record.n_cycles_completed} cycles, {record.wall_clock_seconds:.1f}s)"
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config, sweep_table, _ = load_config_file(args.config)
    config = _apply_overrides(config, args)
    validate_config(config, sweep_table)
    alpha_grid, alpha_j_grid = _check_grids(
        config.model,
        sweep_table.get("alpha_grid", list(np.linspace(0.0, 1.6, 9))),
        sweep_table.get(
            "alpha_j_grid",
            list(np.linspace(0.0, 0.1 if config.model == "bgm" else 0.5, 6)),
        ),
    )
    jobs = args.jobs or sweep_table.get("jobs") or 1
    out_dir = _output_root(args) / _run_id(
        "sweep", config, {"a": list(alpha_grid), "aj": list(alpha_j_grid)}
    )
    _progress(
        f"sweep {config.model}/{config.scheme}: {alpha_grid.size}x{alpha_j_grid.size} "
        f"cells, jobs={jobs} -> {out_dir}"
    )
    result = sweep(config, alpha_grid, alpha_j_grid, jobs=jobs)
    _write_sweep_summary(out_dir, result)
    _write_json(
        out_dir / "sweep.json",
        {
            "config": config.to_dict(),
            "alpha_grid": list(alpha_grid),
            "alpha_j_grid": list(alpha_j_grid),
            "best_alpha": result.best_alpha,
            "best_alpha_j": result.best_alpha_j,
            "best_rmse": result.best_rmse,
            "n_failed": result.n_failed,
        },
    )
    _progress(
        f"done: best (alpha={result.best_alpha}, alpha_j={result.best_alpha_j}) "
        f"rmse {result.best_rmse:.6g}, {result.n_failed} failed cells"
    )
    return EXIT_OK


def _cmd_sensitivity(args) -> int:
    config, sweep_table, sens_table = load_config_file(args.config)
    config = _apply_overrides(config, args)
    validate_config(config, sweep_table)
    experiment = args.experiment or sens_table.get("experiment")
    if experiment is None:
        raise ConfigError(
            "sensitivity needs an experiment ({ensemble, mesh, obs-error}) "
            "via --experiment or [sensitivity].experiment"
        )
    alpha_grid = sweep_table.get("alpha_grid")
    alpha_j_grid = sweep_table.get("alpha_j_grid")
    if alpha_grid is not None or alpha_j_grid is not None:
        _check_grids(
            config.model,
            alpha_grid if alpha_grid is not None else [0.0],
            alpha_j_grid if alpha_j_grid is not None else [0.0],
        )
    values = sens_table.get("values")
    schemes = tuple(sens_table.get("schemes", ("hr", "hra")))
    jobs = args.jobs or sweep_table.get("jobs") or 1
    out_dir = _output_root(args) / _run_id(
        "sensitivity", config, {"experiment": experiment, "values": values}
    )
    _progress(f"sensitivity {config.model}/{experiment} -> {out_dir}")
    try:
        rows = sensitivity_suite(
            config.model,
            experiment,
            schemes=schemes,
            alpha_grid=alpha_grid,
            alpha_j_grid=alpha_j_grid,
            values=values,
            base_config=config,
            jobs=jobs,
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["parameter,value,scheme,best_alpha,best_alpha_j,rmse,rmse_derivative"]
    for row in rows:
        lines.append(
            f"{row.parameter},{row.value!r},{row.scheme},{row.best_alpha!r},"
            f"{row.best_alpha_j!r},{row.rmse!r},{row.rmse_derivative!r}"
        )
    _atomic_write(out_dir / "sensitivity.csv", "\n".join(lines) + "\n")
    _progress(f"done: {len(rows)} rows")
    return EXIT_OK


def _cmd_dump_cov(args) -> int:
    config, sweep_table, _ = load_config_file(args.config)
    config = _apply_overrides(config, args)
    validate_config(config, sweep_table)
    if config.scheme == "free":
        raise ConfigError("dump-cov needs a matched scheme (hr or hra)")
    out_dir = _output_root(args) / _run_id("dump-cov", config, {"every": args.every})
    out_dir.mkdir(parents=True, exist_ok=True)
    _progress(f"dump-cov {config.model}/{config.scheme} -> {out_dir}")

    def hook(info):
        if info.cycle % args.every:
            return
        blocks = covariance_blocks(info.forecast_matched)
        m = blocks.c_uu.shape[0]
        full = np.empty((2 * m, 2 * m))
        full[:m, :m] = blocks.c_uu
        full[:m, m:] = blocks.c_uz
        full[m:, :m] = blocks.c_uz.T
        full[m:, m:] = blocks.c_zz
        path = out_dir / f"cov_t{info.cycle}.csv"
        tmp = path.with_name(path.name + ".tmp")
        np.savetxt(tmp, full, delimiter=",")
        os.replace(tmp, path)

    record = run_twin(config, cycle_hook=hook)
    _write_record(out_dir, record)
    if record.failed:
        _fail("runtime", record.failure_reason or "run failed")
        return EXIT_RUNTIME
    _progress(f"done: {record.n_cycles_completed} cycles")
    return EXIT_OK


def _cmd_validate(args) -> int:
    config, sweep_table, _ = load_config_file(args.config)
    config = _apply_overrides(config, args)
    validate_config(config, sweep_table)
    _progress("config ok")
    return EXIT_OK


# --- argument parsing --------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshenkf",
        description="Twin experiments for ensemble Kalman filtering on "
        "adaptive moving meshes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--output", help=f"output root (default ${OUTPUT_ROOT_ENV} or ./runs)")
        p.add_argument("--scheme", choices=("hr", "hra", "free"))
        p.add_argument("--alpha", type=float, help="inflation override")
        p.add_argument("--alpha-j", dest="alpha_j", type=float, help="jitter override")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--jobs", type=int, help="worker processes for sweeps")

    p_run = sub.add_parser("run", help="one twin experiment")
    common(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="(alpha, alpha_j) tuning grid")
    common(p_sweep)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_sens = sub.add_parser("sensitivity", help="parameter sensitivity suite")
    common(p_sens)
    p_sens.add_argument(
        "--experiment", choices=("ensemble", "mesh", "obs-error"),
        help="which parameter range to vary",
    )
    p_sens.set_defaults(fn=_cmd_sensitivity)

    p_cov = sub.add_parser("dump-cov", help="run and dump forecast covariances")
    common(p_cov)
    p_cov.add_argument(
        "--every", type=int, default=1, help="dump every k-th cycle (default 1)"
    )
    p_cov.set_defaults(fn=_cmd_dump_cov)

    p_val = sub.add_parser("validate-config", help="check a config without running")
    common(p_val)
    p_val.set_defaults(fn=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if err.code is not None else EXIT_USAGE
    try:
        return args.fn(args)
    except ConfigError as err:
        _fail("config", str(err))
        return EXIT_CONFIG
    except (SolverBlowUpError, FilterDegeneracyError, RemeshError, RuntimeError) as err:
        _fail("runtime", str(err))
        return EXIT_RUNTIME


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
