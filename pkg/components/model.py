"""Bound state coupled to a discretized continuum.

All frequencies are angular (hbar = 1). Amplitudes are interaction-picture
coefficients: the free phases exp(-i omega t) are factored out, so a state
with no coupling never changes.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from components.errors import AlignmentError, InvalidParameterError

logger = logging.getLogger(__name__)

NORM_EPS = 1e-9


def _finite(*values) -> bool:
    return all(math.isfinite(v.real) and math.isfinite(v.imag) for v in map(complex, values))


@dataclass(frozen=True)
class Mode:
    omega_k: float
    v_ks: complex

    def __post_init__(self):
        if not _finite(self.omega_k, self.v_ks):
            raise InvalidParameterError(
                f"mode entries must be finite, got omega_k={self.omega_k!r}, v_ks={self.v_ks!r}"
            )


@dataclass(frozen=True)
class ContinuumModel:
    omega_s: float
    modes: tuple[Mode, ...]

    def __post_init__(self):
        if not _finite(self.omega_s):
            raise InvalidParameterError(f"omega_s must be finite, got {self.omega_s!r}")
        if not self.modes:
            raise InvalidParameterError("a continuum model needs at least one mode")
        # sorted() is stable, so ties keep their input order
        ordered = tuple(sorted(self.modes, key=lambda m: m.omega_k))
        object.__setattr__(self, "modes", ordered)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @cached_property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega_k for m in self.modes], dtype=float)

    @cached_property
    def couplings(self) -> np.ndarray:
        return np.array([m.v_ks for m in self.modes], dtype=complex)

    @cached_property
    def detunings(self) -> np.ndarray:
        """delta_k = omega_k - omega_s for every mode."""
        return self.omegas - self.omega_s

    @cached_property
    def coupling_weights(self) -> np.ndarray:
        """|V_ks|^2 for every mode."""
        return np.abs(self.couplings) ** 2


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Interaction-picture amplitudes at ``time``.

    Exact evolution requires norm <= 1 + NORM_EPS (see ``check_normalized``). The
    first-order stepper is not norm-preserving and may push states past that bound.
    """

    alpha_s: complex
    beta: np.ndarray = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        beta = np.array(self.beta, dtype=complex)
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_s", complex(self.alpha_s))

    def norm(self) -> float:
        return float(abs(self.alpha_s) ** 2 + np.sum(np.abs(self.beta) ** 2))

    def survival(self) -> float:
        return float(abs(self.alpha_s) ** 2)

    def check_normalized(self) -> None:
        if self.norm() > 1 + NORM_EPS:
            raise InvalidParameterError(f"state norm {self.norm()!r} exceeds 1 + {NORM_EPS!r}")

    def check_aligned(self, model: ContinuumModel) -> None:
        if self.beta.shape != (model.n_modes,):
            raise AlignmentError(
                f"state carries {self.beta.shape[0] if self.beta.ndim else 0} continuum amplitudes "
                f"but the model has {model.n_modes} modes"
            )

    def replace(self, alpha_s=None, beta=None, time=None) -> "QuantumState":
        return QuantumState(
            alpha_s=self.alpha_s if alpha_s is None else alpha_s,
            beta=self.beta if beta is None else beta,
            time=self.time if time is None else time,
        )


def build_flat_band(n_modes: int, bandwidth: float, coupling: complex, omega_s: float) -> ContinuumModel:
    """Uniform grid of ``n_modes`` cells centred on omega_s, each mode at its cell midpoint."""
    if isinstance(n_modes, bool) or int(n_modes) != n_modes or n_modes < 1:
        raise InvalidParameterError(f"n_modes must be a positive integer, got {n_modes!r}")
    if not _finite(bandwidth, coupling, omega_s):
        raise InvalidParameterError(
            f"flat band parameters must be finite, got bandwidth={bandwidth!r}, "
            f"coupling={coupling!r}, omega_s={omega_s!r}"
        )
    if bandwidth <= 0:
        raise InvalidParameterError(f"bandwidth must be positive, got {bandwidth!r}")

    n_modes = int(n_modes)
    spacing = bandwidth / n_modes
    modes = tuple(
        Mode(omega_k=omega_s - bandwidth / 2 + (j + 0.5) * spacing, v_ks=complex(coupling))
        for j in range(n_modes)
    )
    logger.debug("Built flat band: %d modes, spacing %.6g", n_modes, spacing)
    return ContinuumModel(omega_s=float(omega_s), modes=modes)


def build_custom(omega_s: float, modes) -> ContinuumModel:
    """Build a model from ``(omega_k, v_ks)`` pairs in any order."""
    modes = list(modes)
    if not modes:
        raise InvalidParameterError("build_custom needs a nonempty mode list")
    return ContinuumModel(
        omega_s=float(omega_s),
        modes=tuple(Mode(omega_k=float(w), v_ks=complex(v)) for w, v in modes),
    )


def scale_coupling(model: ContinuumModel, factor: float) -> ContinuumModel:
    return ContinuumModel(
        omega_s=model.omega_s,
        modes=tuple(Mode(m.omega_k, m.v_ks * factor) for m in model.modes),
    )


def zero_coupling(model: ContinuumModel) -> ContinuumModel:
    return scale_coupling(model, 0.0)


def initial_state(model: ContinuumModel) -> QuantumState:
    return QuantumState(alpha_s=1.0, beta=np.zeros(model.n_modes, dtype=complex), time=0.0)


def memory_kernel(model: ContinuumModel, t: float) -> complex:
    """K(t) = sum_k |V_ks|^2 exp(i (omega_s - omega_k) t)."""
    if not _finite(t):
        raise InvalidParameterError(f"memory_kernel needs a finite time, got {t!r}")
    return complex(np.sum(model.coupling_weights * np.exp(-1j * model.detunings * t)))


def golden_rule_rate(model: ContinuumModel) -> float:
    """Gamma = 2 pi |V(omega_s)|^2 rho(omega_s), from the modes nearest omega_s.

    Degenerate modes are merged (their |V|^2 add up). A model with a single
    distinct frequency has no spacing to estimate a density from and returns 0.
    """
    freqs, inverse = np.unique(model.omegas, return_inverse=True)
    if freqs.size < 2:
        return 0.0
    weights = np.bincount(inverse, weights=model.coupling_weights)

    i = int(np.argmin(np.abs(freqs - model.omega_s)))
    if i == 0:
        spacing = freqs[1] - freqs[0]
    elif i == freqs.size - 1:
        spacing = freqs[-1] - freqs[-2]
    else:
        spacing = (freqs[i + 1] - freqs[i - 1]) / 2
    return float(2 * math.pi * weights[i] / spacing)


def model_to_json(model: ContinuumModel) -> str:
    payload = {
        "omega_s": model.omega_s,
        "modes": [[m.omega_k, m.v_ks.real, m.v_ks.imag] for m in model.modes],
    }
    return json.dumps(payload)


def model_from_json(text: str) -> ContinuumModel:
    try:
        payload = json.loads(text)
        omega_s = payload["omega_s"]
        rows = payload["modes"]
        modes = [(row[0], complex(row[1], row[2] if len(row) > 2 else 0.0)) for row in rows]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise InvalidParameterError(f"malformed model JSON: {exc}") from exc
    return build_custom(omega_s, modes)
