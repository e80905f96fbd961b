"""Instantaneous pulse operators and the sequences that schedule them.

A sequence holds one event per grid point: event j is applied at (j+1)*dt,
after the free evolution of segment j. Sign sequences use two conventions:

- pulse signs xi_1..xi_m, one per event (-1 = phase kick, +1 = nothing);
  ``signs[j-1]`` stores xi_j.
- segment signs s_0..s_{m-1}, the sign alpha_s carries while segment j
  evolves (s_0 = 1, s_j = xi_1 * ... * xi_j). The deterministic lambda_j of
  the decoupling scheme are segment signs.
"""

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from components.errors import InvalidParameterError
from components.model import QuantumState

logger = logging.getLogger(__name__)


class PulseKind(Enum):
    PhaseKick = "K"
    Projection = "P"
    Identity = "I"


@dataclass(frozen=True)
class SignSequence:
    signs: tuple[int, ...]

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        bad = [s for s in signs if s not in (1, -1)]
        if bad:
            raise InvalidParameterError(f"sign entries must be +1 or -1, got {bad[:5]!r}")
        object.__setattr__(self, "signs", signs)

    def __len__(self):
        return len(self.signs)

    def __getitem__(self, index):
        return self.signs[index]

    def as_array(self) -> np.ndarray:
        return np.array(self.signs, dtype=float)


@dataclass(frozen=True)
class PulseSequence:
    dt: float
    events: tuple[PulseKind, ...]
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidParameterError(f"pulse interval dt must be positive and finite, got {self.dt!r}")
        object.__setattr__(self, "events", tuple(PulseKind(e) for e in self.events))

    def event_times(self) -> list[float]:
        return [(j + 1) * self.dt for j in range(len(self.events))]

    def describe(self) -> str:
        counts = {kind.name: sum(e is kind for e in self.events) for kind in PulseKind}
        label = self.label or "sequence"
        return f"{label}: dt={self.dt!r}, {len(self.events)} events " + ", ".join(
            f"{k}={v}" for k, v in counts.items() if v
        )


def apply_phase_kick(state: QuantumState) -> QuantumState:
    """2 pi pulse: flips the sign of alpha_s, leaves the continuum alone."""
    return state.replace(alpha_s=-state.alpha_s)


def apply_projection(state: QuantumState) -> QuantumState:
    """Ideal measurement onto |s>; the surviving branch is kept unnormalized."""
    return state.replace(beta=np.zeros_like(state.beta))


def apply_pulse(state: QuantumState, kind: PulseKind) -> QuantumState:
    if kind is PulseKind.PhaseKick:
        return apply_phase_kick(state)
    if kind is PulseKind.Projection:
        return apply_projection(state)
    return state


def _check_count(count, name="count"):
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise InvalidParameterError(f"{name} must be a positive integer, got {count!r}")
    return int(count)


def periodic_sequence(dt: float, count: int, kind: PulseKind) -> PulseSequence:
    count = _check_count(count)
    kind = PulseKind(kind)
    return PulseSequence(dt=dt, events=(kind,) * count, label=f"periodic-{kind.name}")


def _kick_draws(seed: int, count: int) -> np.ndarray:
    # Philox is counter based: draw j depends only on (seed, j), so prefixes are stable.
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    return rng.random(count)


def stochastic_sequence(dt: float, count: int, p_kick: float, seed: int) -> tuple[PulseSequence, SignSequence]:
    """Kick at each grid point with probability ``p_kick``; returns the events and their xi signs."""
    count = _check_count(count)
    if not (0.0 <= p_kick <= 1.0):
        raise InvalidParameterError(f"p_kick must lie in [0, 1], got {p_kick!r}")
    if isinstance(seed, bool) or int(seed) != seed or not (0 <= seed < 2**64):
        raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {seed!r}")

    kicks = _kick_draws(seed, count) < p_kick
    events = tuple(PulseKind.PhaseKick if k else PulseKind.Identity for k in kicks)
    signs = SignSequence(tuple(-1 if k else 1 for k in kicks))
    logger.debug("Stochastic sequence seed=%d: %d/%d kicks", seed, int(kicks.sum()), count)
    return PulseSequence(dt=dt, events=events, label=f"stochastic-p{p_kick!r}-seed{seed}"), signs


def dd_sign_sequence(count: int) -> SignSequence:
    """lambda_j = (-1)^j for j = 0..count-1."""
    count = _check_count(count)
    return SignSequence(tuple(1 if j % 2 == 0 else -1 for j in range(count)))


def segment_signs(xi: SignSequence) -> SignSequence:
    """Segment signs s_0..s_m from pulse signs xi_1..xi_m (s_0 = 1)."""
    return SignSequence((1,) + tuple(int(s) for s in np.cumprod(xi.signs, dtype=int)))


def kick_signs(lambdas: SignSequence) -> SignSequence:
    """Pulse signs xi_1..xi_m that realize segment signs lambda_0..lambda_{m-1}.

    lambda_0 must be +1 (nothing has acted before the first segment). The last
    event has no following segment and is taken as a kick, which only changes
    the global sign of alpha_s.
    """
    if not lambdas.signs or lambdas[0] != 1:
        raise InvalidParameterError("segment signs must start with lambda_0 = +1")
    lam = lambdas.signs
    return SignSequence(tuple(lam[j] * lam[j - 1] for j in range(1, len(lam))) + (-1,))


def sequence_from_signs(dt: float, xi: SignSequence, label: str = "") -> PulseSequence:
    events = tuple(PulseKind.PhaseKick if s == -1 else PulseKind.Identity for s in xi.signs)
    return PulseSequence(dt=dt, events=events, label=label)


def sequence_to_json(seq: PulseSequence) -> str:
    return json.dumps({"dt": seq.dt, "events": [e.value for e in seq.events], "label": seq.label})


def sequence_from_json(text: str) -> PulseSequence:
    try:
        payload = json.loads(text)
        return PulseSequence(
            dt=float(payload["dt"]),
            events=tuple(PulseKind(e) for e in payload["events"]),
            label=payload.get("label", ""),
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise InvalidParameterError(f"malformed pulse sequence JSON: {exc}") from exc
