"""kickctl: run pulse-control experiments and write plot-ready CSV/JSON."""

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import pandas as pd
from sqlalchemy.exc import SQLAlchemyError

from components.analytic import (
    ZenoForm,
    averaged_survival_steps,
    dd_survival,
    identity_suite,
    kicked_survival,
    spontaneous_survival,
    stochastic_survival_curve,
    zeno_survival,
)
from components.ensemble import EnsembleSpec, Evaluator, run_ensemble
from components.errors import ConfigError, KickctlError
from components.model import ContinuumModel, build_flat_band, initial_state, model_from_json, scale_coupling
from components.output import output_paths, write_csv, write_json
from components.propagator import PropagatorChoice, PropagatorKind, run_pulsed
from components.pulses import (
    PulseKind,
    dd_sign_sequence,
    kick_signs,
    periodic_sequence,
    sequence_from_signs,
    stochastic_sequence,
)
from components.settings import load_settings

logger = logging.getLogger(__name__)

EXPERIMENTS = ("spontaneous", "kicked", "stochastic", "ensemble", "zeno", "dd", "validate", "sweep")
SWEEP_AXES = ("dt", "n", "coupling", "p_kick")
METHODS = ("analytic", "exact", "both")

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_ERROR = 2
EXIT_IO = 3


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    model: dict | None = None
    omega_s: float = 0.0
    dt: float | None = None
    n: int | None = None
    p_kick: float = 0.5
    seed: int = 0
    realizations: int | None = None
    output: str | None = None
    method: str = "both"
    t_total: float | None = None
    axis: str | None = None
    values: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        payload = asdict(self)
        if self.values is not None:
            payload["values"] = list(self.values)
        return payload

    def validate(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {', '.join(EXPERIMENTS)}")
        if self.experiment == "validate":
            return self
        if self.method not in METHODS:
            raise ConfigError(f"--method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if self.model is None:
            raise ConfigError(f"{self.experiment} needs a model: pass --model <file.json> or --flat N W V")

        required = {"dt": self.dt, "n": self.n}
        if self.experiment == "ensemble":
            required["realizations"] = self.realizations
        if self.experiment == "sweep":
            if self.axis not in SWEEP_AXES:
                raise ConfigError(f"--axis must be one of {', '.join(SWEEP_AXES)}, got {self.axis!r}")
            if not self.values:
                raise ConfigError("sweep needs a nonempty --values list")
            required.pop(self.axis, None)
            if self.axis == "dt" and self.t_total is not None:
                required.pop("n", None)
            if self.axis == "p_kick" and self.method != "analytic":
                required["realizations"] = self.realizations
        missing = [f"--{name.replace('_', '-')}" for name, value in required.items() if value is None]
        if missing:
            raise ConfigError(f"{self.experiment} requires {', '.join(missing)}")
        if self.n is not None and (int(self.n) != self.n or self.n < 1):
            raise ConfigError(f"--n must be a positive integer, got {self.n!r}")
        return self


def load_config_file(path) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(payload) - known - {"flat"})
    if unknown:
        raise ConfigError(f"config file {path} has unknown keys: {', '.join(unknown)}")
    if "flat" in payload:
        payload["model"] = {"flat": payload.pop("flat")}
    elif isinstance(payload.get("model"), str):
        payload["model"] = _read_model_file(payload["model"])
    return payload


def config_from_args(args) -> RunConfig:
    """Config-file values overlaid by every flag the user actually passed."""
    merged = load_config_file(args.config) if getattr(args, "config", None) else {}
    merged["experiment"] = args.command

    if getattr(args, "model", None):
        merged["model"] = _read_model_file(args.model)
    elif getattr(args, "flat", None):
        merged["model"] = {"flat": list(args.flat)}
    for name in ("omega_s", "dt", "n", "p_kick", "seed", "realizations", "output", "method", "t_total", "axis"):
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    if getattr(args, "values", None):
        merged["values"] = tuple(args.values)
    elif "values" in merged:
        merged["values"] = tuple(merged["values"])
    return RunConfig(**merged).validate()


def _read_model_file(path) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"model file {path} must hold a JSON object")
    return payload


def build_model(config: RunConfig) -> ContinuumModel:
    source = config.model
    if "flat" not in source:
        return model_from_json(json.dumps(source))
    try:
        n_modes, bandwidth, coupling = source["flat"]
        n_modes, bandwidth, coupling = int(n_modes), float(bandwidth), complex(str(coupling).replace(" ", ""))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"--flat expects <n_modes> <bandwidth> <coupling>, got {source['flat']!r}") from exc
    return build_flat_band(n_modes, bandwidth, coupling, config.omega_s)


# -- experiments -----------------------------------------------------------------------------

def _times(dt, steps):
    return np.arange(steps + 1) * dt


def _exact_curve(model, seq):
    return np.asarray(run_pulsed(model, initial_state(model), seq, PropagatorChoice(PropagatorKind.Exact)).p_s)


def run_spontaneous(model, config, threads):
    steps = 2 * config.n
    times = _times(config.dt, steps)
    frame = pd.DataFrame({
        "t": times,
        "analytic": [spontaneous_survival(model, t) for t in times],
        "exact": _exact_curve(model, periodic_sequence(config.dt, steps, PulseKind.Identity)),
    })
    return frame, None


def run_kicked(model, config, threads):
    steps = 2 * config.n
    analytic = [1.0] + [kicked_survival(model, config.dt, m) for m in range(1, config.n + 1)]
    exact = _exact_curve(model, periodic_sequence(config.dt, steps, PulseKind.PhaseKick))
    frame = pd.DataFrame({"t": _times(config.dt, steps)[::2], "analytic": analytic, "exact": exact[::2]})
    return frame, None


def run_stochastic(model, config, threads):
    steps = 2 * config.n
    seq, signs = stochastic_sequence(config.dt, steps, config.p_kick, config.seed)
    frame = pd.DataFrame({
        "t": _times(config.dt, steps),
        "analytic": stochastic_survival_curve(model, config.dt, signs),
        "exact": _exact_curve(model, seq),
        # 0 marks t = 0, before any pulse
        "xi": [0, *signs.signs],
    })
    return frame, None


def run_ensemble_experiment(model, config, threads):
    evaluator = Evaluator.Exact if config.method == "exact" else Evaluator.Analytic
    spec = EnsembleSpec(
        n_realizations=config.realizations,
        dt=config.dt,
        n_steps=2 * config.n,
        p_kick=config.p_kick,
        seed=config.seed,
        evaluator=evaluator,
    )
    report = run_ensemble(model, spec, threads)
    return report.to_frame(), report.to_sidecar()


def run_zeno(model, config, threads):
    steps = 2 * config.n
    ns = range(config.n + 1)
    frame = pd.DataFrame({
        "t": _times(config.dt, steps)[::2],
        "linearized": [zeno_survival(model, config.dt, m, ZenoForm.Linearized) for m in ns],
        "product": [zeno_survival(model, config.dt, m, ZenoForm.Product) for m in ns],
        "exact": _exact_curve(model, periodic_sequence(config.dt, steps, PulseKind.Projection))[::2],
    })
    return frame, None


def run_dd(model, config, threads):
    steps = 2 * config.n
    dd = [1.0] + [dd_survival(model, config.dt, m, dd_sign_sequence(2 * m)) for m in range(1, config.n + 1)]
    kicked = [1.0] + [kicked_survival(model, config.dt, m) for m in range(1, config.n + 1)]
    seq = sequence_from_signs(config.dt, kick_signs(dd_sign_sequence(steps)), label="dd")
    frame = pd.DataFrame({
        "t": _times(config.dt, steps)[::2],
        "dd": dd,
        "kicked": kicked,
        "exact": _exact_curve(model, seq)[::2],
    })
    return frame, None


def run_validate(config):
    checks = identity_suite()
    frame = pd.DataFrame(
        {
            "identity": [c.name for c in checks],
            "passed": [c.passed for c in checks],
            "max_error": [c.max_error for c in checks],
            "tolerance": [c.tolerance for c in checks],
        }
    )
    return frame, checks


def _sweep_point(model, config, value, threads):
    """(method, thunk) pairs for one axis value; each thunk returns (times, p_s)."""
    dt, n = config.dt, config.n
    if config.axis == "dt":
        dt = float(value)
        if config.t_total is not None:
            n = max(1, int(round(config.t_total / (2 * dt))))
    elif config.axis == "n":
        n = int(value)
    elif config.axis == "coupling":
        model = scale_coupling(model, float(value))
    times = _times(dt, 2 * n)

    if config.axis == "p_kick":
        p = float(value)
        points = [("analytic", lambda: (times, [averaged_survival_steps(model, dt, m, p) for m in range(2 * n + 1)]))]
        if config.method != "analytic":
            spec = EnsembleSpec(config.realizations, dt, 2 * n, p, config.seed, Evaluator.Exact)
            points.append(("ensemble", lambda: (times, run_ensemble(model, spec, threads).curve.p_s)))
        return points

    points = []
    if config.method in ("analytic", "both"):
        points.append(
            ("analytic", lambda: (times[::2], [1.0] + [kicked_survival(model, dt, m) for m in range(1, n + 1)]))
        )
    if config.method in ("exact", "both"):
        seq = periodic_sequence(dt, 2 * n, PulseKind.PhaseKick)
        points.append(("exact", lambda: (times[::2], _exact_curve(model, seq)[::2])))
    return points


def run_sweep(model, config, threads):
    rows = []
    for value in config.values:
        for method, evaluate in _sweep_point(model, config, value, threads):
            try:
                times, p_s = evaluate()
            except KickctlError as exc:
                logger.info("sweep %s=%r (%s) failed: %s", config.axis, value, method, exc)
                rows.append(
                    {"axis_value": value, "t": math.nan, "p_s": math.nan, "method": method,
                     "error": f"{type(exc).__name__}: {exc}"}
                )
                continue
            rows.extend(
                {"axis_value": value, "t": t, "p_s": p, "method": method, "error": ""}
                for t, p in zip(times, p_s)
            )
    return pd.DataFrame(rows, columns=["axis_value", "t", "p_s", "method", "error"]), None


RUNNERS = {
    "spontaneous": run_spontaneous,
    "kicked": run_kicked,
    "stochastic": run_stochastic,
    "ensemble": run_ensemble_experiment,
    "zeno": run_zeno,
    "dd": run_dd,
    "sweep": run_sweep,
}


def run(config: RunConfig, threads: int = 1) -> tuple[int, str]:
    """Run one experiment, write its outputs and return (exit status, summary line)."""
    if config.experiment == "validate":
        frame, checks = run_validate(config)
        for check in checks:
            status = "PASS" if check.passed else "FAIL"
            print(f"{status} {check.name}: max_error={check.max_error:.3e} tol={check.tolerance:.1e} ({check.cases} cases)")
        if config.output:
            write_csv(frame, output_paths(config.output)[0])
        failed = [c.name for c in checks if not c.passed]
        if failed:
            return EXIT_VALIDATION_FAILED, f"validate: {len(failed)} of {len(checks)} identities failed ({', '.join(failed)})"
        return EXIT_OK, f"validate: all {len(checks)} identities passed"

    model = build_model(config)
    frame, sidecar = RUNNERS[config.experiment](model, config, threads)

    prefix = config.output or f"kickctl-{config.experiment}"
    csv_path, json_path = output_paths(prefix)
    write_csv(frame, csv_path)
    summary = f"{config.experiment}: {len(frame)} rows -> {csv_path}"
    if sidecar is not None:
        write_json({**sidecar, "config": config.to_dict()}, json_path)
        summary += f" (+ {json_path.name}, z={sidecar['z_score']:.3f})"
    return EXIT_OK, summary


# -- argument parsing ------------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--model", metavar="FILE", help="model JSON {omega_s, modes: [[omega_k, re_v, im_v], ...]}")
    source.add_argument("--flat", nargs=3, metavar=("N_MODES", "BANDWIDTH", "COUPLING"), help="flat band model")
    common.add_argument("--omega-s", type=float, dest="omega_s")
    common.add_argument("--dt", type=float)
    common.add_argument("--n", type=int, help="half the number of pulse intervals (2n steps)")
    common.add_argument("--p-kick", type=float, dest="p_kick")
    common.add_argument("--seed", type=int)
    common.add_argument("--realizations", type=int)
    common.add_argument("--method", choices=METHODS)
    common.add_argument("--t-total", type=float, dest="t_total")
    common.add_argument("-o", "--output", metavar="PREFIX")
    common.add_argument("--config", metavar="FILE", help="JSON run configuration; flags override it")
    common.add_argument("--record", action="store_true", help="store the run in the run ledger")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kickctl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    for name in EXPERIMENTS:
        p = sub.add_parser(name, parents=[common])
        if name == "sweep":
            p.add_argument("--axis", choices=SWEEP_AXES)
            p.add_argument("--values", nargs="+", type=float)
    history = sub.add_parser("history", help="list recorded runs")
    history.add_argument("--limit", type=int, default=20)
    history.add_argument("--experiment", choices=EXPERIMENTS, help="only runs of this experiment")
    history.add_argument("-v", "--verbose", action="store_true")
    return parser


def _configure_logging(verbose: bool, level_name: str) -> None:
    level = logging.DEBUG if verbose else getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _record(config_dict, experiment, prefix, status, summary):
    from database.manager import DatabaseManager

    try:
        DatabaseManager.save_run(experiment, config_dict, prefix, status, summary)
    except SQLAlchemyError as exc:
        logger.warning("Could not record run in ledger: %s", exc)


def _history(limit: int, experiment: str | None = None) -> int:
    from database.manager import DatabaseManager

    if experiment:
        records = DatabaseManager.runs_for_experiment(experiment, limit)
    else:
        records = DatabaseManager.recent_runs(limit)
    for record in records:
        print(f"{record.id}\t{record.created_at:%Y-%m-%d %H:%M:%S}\t{record.experiment}\t{record.exit_status}\t{record.summary}")
    return EXIT_OK


def main(argv=None) -> int:
    settings = load_settings()
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, settings.log_level)

    if args.command == "history":
        try:
            return _history(args.limit, args.experiment)
        except SQLAlchemyError as exc:
            print(f"kickctl: error: run ledger unavailable: {exc}", file=sys.stderr)
            return EXIT_IO

    config = None
    try:
        config = config_from_args(args)
        status, summary = run(config, settings.worker_count())
    except KickctlError as exc:
        status, summary = EXIT_ERROR, f"kickctl: error: {exc}"
        print(summary, file=sys.stderr)
    except OSError as exc:
        status, summary = EXIT_IO, f"kickctl: I/O error: {exc}"
        print(summary, file=sys.stderr)
    else:
        print(summary)

    if args.record or settings.db_url:
        _record(
            config.to_dict() if config else {"experiment": args.command},
            args.command,
            config.output if config else None,
            status,
            summary,
        )
    return status
