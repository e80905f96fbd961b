"""Exception hierarchy shared by every kickctl module.

Each exception carries the values needed to reproduce the failure; the CLI
prints ``str(exc)`` verbatim, so messages must stand on their own.
"""

import math


class KickctlError(Exception):
    """Base class for all errors raised by kickctl."""


class InvalidParameterError(KickctlError, ValueError):
    pass


class AlignmentError(KickctlError, ValueError):
    pass


class ConfigError(KickctlError, ValueError):
    pass


class PropagationError(KickctlError, RuntimeError):
    pass


class ResonanceError(KickctlError, ArithmeticError):
    """A closed-form denominator vanishes: (omega_k - omega_s) * dt is near pi (mod 2 pi)."""

    def __init__(self, mode_index, omega_k, omega_s, dt, formula):
        self.mode_index = mode_index
        self.omega_k = omega_k
        self.omega_s = omega_s
        self.dt = dt
        self.formula = formula
        self.phase = (omega_k - omega_s) * dt
        detuning = abs(omega_s - omega_k)
        self.singular_dt = math.pi / detuning if detuning > 0 else math.inf
        super().__init__(
            f"{formula}: resonance at mode {mode_index} (omega_k={omega_k!r}, omega_s={omega_s!r}); "
            f"dt={dt!r} gives phase (omega_k-omega_s)*dt={self.phase!r}, "
            f"singular near dt = pi/|omega_s-omega_k| = {self.singular_dt!r}"
        )

    def __reduce__(self):
        return type(self), (self.mode_index, self.omega_k, self.omega_s, self.dt, self.formula)


class PerturbativeBreakdownError(KickctlError, ArithmeticError):
    """A first-order survival formula left [0, 1]; the raw value is kept for inspection."""

    def __init__(self, formula, raw_value, **params):
        self.formula = formula
        self.raw_value = raw_value
        self.params = params
        rendered = ", ".join(f"{k}={v!r}" for k, v in params.items())
        super().__init__(
            f"{formula}: perturbative breakdown, raw survival {raw_value!r} < 0 ({rendered})"
        )

    def __reduce__(self):
        return _rebuild_breakdown, (type(self), self.formula, self.raw_value, self.params)


class RealizationError(KickctlError):
    """An ensemble realization failed; index and seed reproduce it."""

    def __init__(self, index, seed, cause):
        self.index = index
        self.seed = seed
        self.cause = cause
        super().__init__(f"realization {index} (seed={seed}) failed: {cause}")

    def __reduce__(self):
        return type(self), (self.index, self.seed, self.cause)


def _rebuild_breakdown(cls, formula, raw_value, params):
    return cls(formula, raw_value, **params)
