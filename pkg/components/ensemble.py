"""Monte Carlo averaging over stochastic kick realizations."""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import pandas as pd

from components.analytic import averaged_survival_steps, stochastic_survival_curve
from components.errors import InvalidParameterError, KickctlError, RealizationError
from components.model import ContinuumModel, initial_state
from components.output import write_csv, write_json
from components.propagator import PropagatorChoice, PropagatorKind, SurvivalCurve, run_pulsed
from components.pulses import stochastic_sequence
from components.workers import parallel_map

logger = logging.getLogger(__name__)

REALIZATION_STREAM = 0
CONVERGENCE_STREAM = 1


class Evaluator(Enum):
    Analytic = "analytic"
    Exact = "exact"


@dataclass(frozen=True)
class EnsembleSpec:
    n_realizations: int
    dt: float
    n_steps: int
    p_kick: float = 0.5
    seed: int = 0
    evaluator: Evaluator = Evaluator.Analytic

    def __post_init__(self):
        object.__setattr__(self, "evaluator", Evaluator(self.evaluator))
        if isinstance(self.n_realizations, bool) or int(self.n_realizations) != self.n_realizations:
            raise InvalidParameterError(f"n_realizations must be an integer, got {self.n_realizations!r}")
        if self.n_realizations < 2:
            raise InvalidParameterError(
                f"n_realizations must be at least 2 for a standard error, got {self.n_realizations!r}"
            )
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidParameterError(f"dt must be positive and finite, got {self.dt!r}")
        if isinstance(self.n_steps, bool) or int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise InvalidParameterError(f"n_steps must be a positive even integer, got {self.n_steps!r}")
        if self.n_steps % 2:
            raise InvalidParameterError(f"n_steps must be even (2n), got {self.n_steps!r}")
        if not (0.0 <= self.p_kick <= 1.0):
            raise InvalidParameterError(f"p_kick must lie in [0, 1], got {self.p_kick!r}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not (0 <= self.seed < 2**64):
            raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "n_realizations", int(self.n_realizations))
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class EnsembleReport:
    curve: SurvivalCurve
    analytic_mean: float
    z_score: float
    analytic_curve: tuple[float, ...]
    n_realizations: int
    seed: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.curve.times, "mean_p_s": self.curve.p_s, "stderr": self.curve.stderr})

    def to_sidecar(self) -> dict:
        return {
            "analytic_mean": self.analytic_mean,
            "z_score": self.z_score,
            "n_realizations": self.n_realizations,
            "seed": self.seed,
        }

    def write(self, csv_path, json_path, extra: dict | None = None) -> None:
        write_csv(self.to_frame(), csv_path)
        write_json({**self.to_sidecar(), **(extra or {})}, json_path)


@dataclass(frozen=True)
class ConvergenceRow:
    count: int
    deviation: float
    stderr: float


def derive_seed(master: int, *path: int) -> int:
    """Child seed for ``path`` under ``master``, independent of evaluation order."""
    state = np.random.SeedSequence([int(master), *(int(p) for p in path)]).generate_state(1, np.uint64)
    return int(state[0])


class _RealizationTask:
    """Picklable per-realization evaluator handed to worker processes."""

    def __init__(self, model: ContinuumModel, spec: EnsembleSpec):
        self.model = model
        self.spec = spec

    def __call__(self, index: int) -> "np.ndarray | RealizationError":
        spec = self.spec
        seed = derive_seed(spec.seed, REALIZATION_STREAM, index)
        try:
            seq, signs = stochastic_sequence(spec.dt, spec.n_steps, spec.p_kick, seed)
            if spec.evaluator is Evaluator.Analytic:
                return stochastic_survival_curve(self.model, spec.dt, signs)
            curve = run_pulsed(self.model, initial_state(self.model), seq, PropagatorChoice(PropagatorKind.Exact))
            return np.asarray(curve.p_s)
        except KickctlError as exc:
            # failures come back as values; run_ensemble raises the lowest failing index
            return RealizationError(index, seed, exc)


def run_ensemble(model: ContinuumModel, spec: EnsembleSpec, threads: int = 1) -> EnsembleReport:
    logger.info(
        "Ensemble: %d realizations, dt=%r, %d steps, p_kick=%r, seed=%d, %s evaluator",
        spec.n_realizations, spec.dt, spec.n_steps, spec.p_kick, spec.seed, spec.evaluator.value,
    )
    results = parallel_map(_RealizationTask(model, spec), range(spec.n_realizations), threads)
    for result in results:
        if isinstance(result, RealizationError):
            raise result from result.cause
    curves = np.vstack(results)

    identical = np.ptp(curves, axis=0) == 0
    mean = np.where(identical, curves[0], curves.mean(axis=0))
    stderr = np.where(identical, 0.0, curves.std(axis=0, ddof=1) / math.sqrt(spec.n_realizations))

    analytic_curve = tuple(averaged_survival_steps(model, spec.dt, m, spec.p_kick) for m in range(spec.n_steps + 1))
    analytic_mean = analytic_curve[-1]
    z_score = (mean[-1] - analytic_mean) / stderr[-1] if stderr[-1] > 0 else 0.0

    curve = SurvivalCurve(
        times=spec.times,
        p_s=mean,
        stderr=stderr,
        meta={"method": f"ensemble-{spec.evaluator.value}", "dt": spec.dt, "n": spec.n_steps // 2, "seed": spec.seed},
    )
    logger.info("Ensemble mean %.12g vs analytic %.12g (z=%.3f)", mean[-1], analytic_mean, z_score)
    return EnsembleReport(
        curve=curve,
        analytic_mean=float(analytic_mean),
        z_score=float(z_score),
        analytic_curve=analytic_curve,
        n_realizations=spec.n_realizations,
        seed=spec.seed,
    )


def convergence_study(model: ContinuumModel, spec: EnsembleSpec, ladder, threads: int = 1) -> list[ConvergenceRow]:
    """One fresh sub-seeded ensemble per realization count in ``ladder``."""
    ladder = [int(c) for c in ladder]
    if not ladder:
        raise InvalidParameterError("convergence ladder must not be empty")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise InvalidParameterError(f"convergence ladder must be strictly ascending, got {ladder!r}")

    rows = []
    for rung, count in enumerate(ladder):
        sub = replace(spec, n_realizations=count, seed=derive_seed(spec.seed, CONVERGENCE_STREAM, rung))
        report = run_ensemble(model, sub, threads)
        rows.append(
            ConvergenceRow(
                count=count,
                deviation=abs(report.curve.p_s[-1] - report.analytic_mean),
                stderr=report.curve.stderr[-1],
            )
        )
    return rows
