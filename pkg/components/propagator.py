"""Time evolution: exact eigendecomposition oracle, short-time stepper, pulse driver."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterator

import numpy as np
import pandas as pd

from components.analytic import kernel_integral, phase_integral
from components.errors import InvalidParameterError, PropagationError
from components.model import NORM_EPS, ContinuumModel, QuantumState
from components.output import write_csv
from components.pulses import PulseKind, PulseSequence, apply_pulse

logger = logging.getLogger(__name__)


class PropagatorKind(Enum):
    Exact = "exact"
    Perturbative = "perturbative"


@dataclass(frozen=True)
class PropagatorChoice:
    kind: PropagatorKind = PropagatorKind.Exact
    tol: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "kind", PropagatorKind(self.kind))
        if not (0 < self.tol <= 1e-2):
            raise InvalidParameterError(f"propagator tol must lie in (0, 1e-2], got {self.tol!r}")


@dataclass(frozen=True)
class SurvivalCurve:
    times: tuple[float, ...]
    p_s: tuple[float, ...]
    stderr: tuple[float, ...] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        p_s = tuple(float(p) for p in self.p_s)
        if len(times) != len(p_s):
            raise InvalidParameterError(f"curve has {len(times)} times but {len(p_s)} probabilities")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidParameterError("curve times must be strictly ascending")
        if self.stderr is not None:
            stderr = tuple(float(s) for s in self.stderr)
            if len(stderr) != len(times):
                raise InvalidParameterError(f"curve has {len(times)} times but {len(stderr)} standard errors")
            object.__setattr__(self, "stderr", stderr)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "p_s", p_s)

    def __len__(self):
        return len(self.times)

    def to_frame(self) -> pd.DataFrame:
        columns = {"t": self.times, "p_s": self.p_s}
        if self.stderr is not None:
            columns["stderr"] = self.stderr
        return pd.DataFrame(columns)

    def to_csv(self, path) -> None:
        write_csv(self.to_frame(), path)


# -- exact oracle ----------------------------------------------------------------------------

def hamiltonian_matrix(model: ContinuumModel) -> np.ndarray:
    """Index 0 is |s>, index k+1 is mode k; <k|H|s> = V_ks."""
    size = model.n_modes + 1
    h = np.zeros((size, size), dtype=complex)
    h[0, 0] = model.omega_s
    h[np.arange(1, size), np.arange(1, size)] = model.omegas
    h[1:, 0] = model.couplings
    h[0, 1:] = np.conj(model.couplings)
    return h


@lru_cache(maxsize=32)
def _spectrum(model: ContinuumModel):
    logger.debug("Diagonalizing %dx%d Hamiltonian", model.n_modes + 1, model.n_modes + 1)
    energies, vectors = np.linalg.eigh(hamiltonian_matrix(model))
    energies.setflags(write=False)
    vectors.setflags(write=False)
    return energies, vectors


def _check_duration(duration):
    if not (math.isfinite(duration) and duration >= 0):
        raise InvalidParameterError(f"duration must be nonnegative and finite, got {duration!r}")


def _evolve_to(model: ContinuumModel, state: QuantumState, t_end: float) -> QuantumState:
    energies, vectors = _spectrum(model)
    free = np.concatenate(([model.omega_s], model.omegas))
    amplitudes = np.concatenate(([state.alpha_s], state.beta))

    schrodinger = amplitudes * np.exp(-1j * free * state.time)
    evolved = vectors @ (np.exp(-1j * energies * (t_end - state.time)) * (vectors.conj().T @ schrodinger))
    back = evolved * np.exp(1j * free * t_end)
    return QuantumState(alpha_s=back[0], beta=back[1:], time=t_end)


def evolve_exact(model: ContinuumModel, state: QuantumState, duration: float) -> QuantumState:
    _check_duration(duration)
    state.check_aligned(model)
    state.check_normalized()
    if duration == 0:
        return state
    return _evolve_to(model, state, state.time + duration)


# -- short-time stepper ----------------------------------------------------------------------

def _step_to(model: ContinuumModel, state: QuantumState, duration: float, t_end: float) -> QuantumState:
    # alpha_s and beta are held at their step-start values inside the integrals
    frame = np.exp(1j * model.detunings * state.time)
    c = phase_integral(model, duration)
    kernel = np.sum(model.coupling_weights * kernel_integral(model, duration))

    beta = state.beta - 1j * model.couplings * state.alpha_s * frame * c
    feedback = np.sum(np.conj(model.couplings) * state.beta * np.conj(frame * c))
    alpha = state.alpha_s * (1 - kernel) - 1j * feedback
    return QuantumState(alpha_s=alpha, beta=beta, time=t_end)


def step_perturbative(model: ContinuumModel, state: QuantumState, duration: float) -> QuantumState:
    """Advance by one short step with the closed-form first-order update.

    Accurate to O(|V|^3) per step; the caller keeps Gamma * duration small.
    """
    _check_duration(duration)
    state.check_aligned(model)
    if duration == 0:
        return state
    return _step_to(model, state, duration, state.time + duration)


# -- pulse driver ----------------------------------------------------------------------------

def run_pulsed_states(
    model: ContinuumModel, initial: QuantumState, seq: PulseSequence, choice: PropagatorChoice = PropagatorChoice()
) -> Iterator[QuantumState]:
    """Yield the initial state, then the state right after each pulse event."""
    initial.check_aligned(model)
    choice = choice if isinstance(choice, PropagatorChoice) else PropagatorChoice(kind=choice)
    if choice.kind is PropagatorKind.Exact:
        initial.check_normalized()
    unitary = choice.kind is PropagatorKind.Exact and PulseKind.Projection not in seq.events
    start_norm = initial.norm()

    state = initial
    yield state
    for j, event in enumerate(seq.events):
        t_end = initial.time + (j + 1) * seq.dt
        if choice.kind is PropagatorKind.Exact:
            state = _evolve_to(model, state, t_end)
        else:
            state = _step_to(model, state, t_end - state.time, t_end)
        state = apply_pulse(state, event)

        if unitary and abs(state.norm() - start_norm) > choice.tol:
            raise PropagationError(
                f"norm drifted from {start_norm!r} to {state.norm()!r} after event {j} "
                f"(t={t_end!r}, tol={choice.tol!r})"
            )
        yield state


def run_pulsed(
    model: ContinuumModel, initial: QuantumState, seq: PulseSequence, choice: PropagatorChoice = PropagatorChoice()
) -> SurvivalCurve:
    choice = choice if isinstance(choice, PropagatorChoice) else PropagatorChoice(kind=choice)
    states = list(run_pulsed_states(model, initial, seq, choice))
    p_s = [s.survival() for s in states]
    if max(p_s) > 1 + NORM_EPS:
        logger.warning("Survival exceeded 1 by %.3g under %s propagation", max(p_s) - 1, choice.kind.value)
    logger.debug("run_pulsed: %s, %s", choice.kind.value, seq.describe())
    return SurvivalCurve(
        times=[s.time for s in states],
        p_s=p_s,
        meta={"method": choice.kind.value, "dt": seq.dt, "events": len(seq.events), "sequence": seq.describe()},
    )
