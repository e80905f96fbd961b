"""Closed-form first-order survival probabilities and amplitudes.

Notation shared by every function here, per mode k:

    delta_k = omega_k - omega_s,   theta_k = delta_k * dt,   r_k = exp(i theta_k)
    c_k     = integral_0^dt exp(i delta_k u) du = (r_k - 1) / (i delta_k)

To second order in the couplings, a pulse history that leaves alpha_s with
sign s_j during segment j (j = 0..N-1) gives

    P(N dt) = 1 - sum_k |V_ks|^2 |c_k|^2 |sum_j s_j r_k^j|^2

The evaluators below keep the kernel term, the F^1/F^2 terms and the
pulse-feedback sums separate, and agree with this form identically.
sinc-type 0/0 points (delta_k = 0) always take their analytic limit; tan-type
singularities (theta_k = pi mod 2 pi) raise ResonanceError.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from components.errors import InvalidParameterError, PerturbativeBreakdownError, ResonanceError
from components.model import ContinuumModel, build_custom
from components.pulses import SignSequence, dd_sign_sequence, segment_signs

logger = logging.getLogger(__name__)


class ResonanceBehavior(Enum):
    Error = "error"
    Limit = "limit"


@dataclass(frozen=True)
class ResonanceGuard:
    """Distance from theta = pi (mod 2 pi) below which tan-type formulas refuse to evaluate.

    ``Limit`` only affects sinc-type points, which always use their series
    limit anyway; tan-type points have no finite limit and raise under both.
    """

    threshold: float = 1e-8
    behavior: ResonanceBehavior = ResonanceBehavior.Error

    def __post_init__(self):
        if not (self.threshold > 0):
            raise InvalidParameterError(f"resonance threshold must be positive, got {self.threshold!r}")
        object.__setattr__(self, "behavior", ResonanceBehavior(self.behavior))


DEFAULT_GUARD = ResonanceGuard()


class ZenoForm(Enum):
    Linearized = "linearized"
    Product = "product"


@dataclass(frozen=True)
class KickedTerms:
    term_a: float
    term_b: float
    term_c: float

    @property
    def survival(self) -> float:
        return 1.0 - self.term_a - self.term_b - self.term_c


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    cases: int


# -- shared closed-form integrals -------------------------------------------------------------

def _sinc(x):
    """Unnormalized sinc, sin(x)/x, exact at 0."""
    return np.sinc(np.asarray(x) / np.pi)


def _check_dt(dt, name="dt"):
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidParameterError(f"{name} must be positive and finite, got {dt!r}")


def _check_n(n, allow_zero=False):
    low = 0 if allow_zero else 1
    if isinstance(n, bool) or int(n) != n or n < low:
        kind = "a nonnegative" if allow_zero else "a positive"
        raise InvalidParameterError(f"n must be {kind} integer, got {n!r}")
    return int(n)


def phase_integral(model: ContinuumModel, dt: float) -> np.ndarray:
    """c_k = integral_0^dt exp(i delta_k u) du for every mode (-> dt on resonance)."""
    half = model.detunings * dt / 2
    return dt * _sinc(half) * np.exp(1j * half)


def _segment_weights(model: ContinuumModel, dt: float) -> np.ndarray:
    """|V_ks|^2 |c_k|^2 = |V_ks|^2 dt^2 sinc^2(theta_k / 2)."""
    return model.coupling_weights * (dt * _sinc(model.detunings * dt / 2)) ** 2


def _theta_minus_sin_over_theta2(theta: np.ndarray) -> np.ndarray:
    out = np.empty_like(theta)
    small = np.abs(theta) < 0.1
    t = theta[small]
    t2 = t * t
    out[small] = t * (1 / 6 - t2 * (1 / 120 - t2 * (1 / 5040 - t2 * (1 / 362880 - t2 / 39916800))))
    big = theta[~small]
    out[~small] = (big - np.sin(big)) / big**2
    return out


def kernel_integral(model: ContinuumModel, dt: float) -> np.ndarray:
    """Per-mode integral_0^dt (dt - u) exp(-i delta_k u) du.

    Summed with weights |V_ks|^2 this is the memory-kernel double integral of
    the short-time step; its real part is (dt^2/2) sinc^2(theta/2).
    """
    theta = model.detunings * dt
    real = dt**2 / 2 * _sinc(theta / 2) ** 2
    imag = -(dt**2) * _theta_minus_sin_over_theta2(theta)
    return real + 1j * imag


def _tan_resonances(model: ContinuumModel, dt: float, guard: ResonanceGuard) -> np.ndarray:
    theta = model.detunings * dt
    distance = np.abs(np.mod(theta, 2 * np.pi) - np.pi)
    return np.flatnonzero(distance < guard.threshold)


def _require_off_resonance(model, dt, guard, formula, indices=None):
    hits = _tan_resonances(model, dt, guard)
    if indices is not None:
        hits = np.intersect1d(hits, indices)
    if hits.size:
        k = int(hits[0])
        logger.debug("%s: %d modes within %.3g of theta = pi", formula, hits.size, guard.threshold)
        raise ResonanceError(k, model.omegas[k], model.omega_s, dt, formula)


def _nonnegative(formula, value, **params):
    if value < 0:
        raise PerturbativeBreakdownError(formula, float(value), **params)
    return float(value)


def geometric_sum(r, m: int):
    """sum_{j=1}^{m} r^j, elementwise for array r; near r = 1 uses the series limit."""
    m = _check_n(m, allow_zero=True)
    r_arr = np.asarray(r, dtype=complex)
    one_minus = 1 - r_arr
    near_one = np.abs(one_minus) < DEFAULT_GUARD.threshold
    safe = np.where(near_one, 0.5, one_minus)
    closed = r_arr * (1 - r_arr**m) / safe
    limit = m + (r_arr - 1) * m * (m + 1) / 2
    out = np.where(near_one, limit, closed)
    return complex(out) if out.ndim == 0 else out


def _phasor_sums(model: ContinuumModel, dt: float, seg: np.ndarray) -> np.ndarray:
    """Row m holds sum_{j<m} s_j r_k^j for m = 0..len(seg)."""
    j = np.arange(seg.size)
    terms = seg[:, None] * np.exp(1j * np.outer(j, model.detunings * dt))
    sums = np.zeros((seg.size + 1, model.n_modes), dtype=complex)
    np.cumsum(terms, axis=0, out=sums[1:])
    return sums


# -- spontaneous decay -----------------------------------------------------------------------

def spontaneous_survival(model: ContinuumModel, t: float) -> float:
    """1 - sum_k |V_ks|^2 sin^2(delta_k t/2) / (delta_k/2)^2, i.e. |V|^2 t^2 on resonance."""
    if not (math.isfinite(t) and t >= 0):
        raise InvalidParameterError(f"t must be nonnegative and finite, got {t!r}")
    depletion = np.sum(model.coupling_weights * (t * _sinc(model.detunings * t / 2)) ** 2)
    return _nonnegative("spontaneous_survival", 1.0 - depletion, t=t)


# -- periodic phase kicks --------------------------------------------------------------------

def avg_decay_rate(model: ContinuumModel, dt: float) -> float:
    """gamma_avg = dt sum_k |V_ks|^2 sinc^2(delta_k dt / 2)."""
    _check_dt(dt)
    return float(dt * np.sum(model.coupling_weights * _sinc(model.detunings * dt / 2) ** 2))


def _kicked_f2(model, dt, n_steps):
    # -N |V|^2 exp(-i theta) c^2 / (1 + r), rewritten so its real part carries no tan
    half = model.detunings * dt / 2
    return -n_steps * model.coupling_weights * (dt**2 / 2) * _sinc(half) ** 2 * (1 - 1j * np.tan(half))


def kicked_terms(model: ContinuumModel, dt: float, n: int, guard: ResonanceGuard = DEFAULT_GUARD) -> KickedTerms:
    """Terms A, B and C of the periodic-kick survival after 2n pulses."""
    _check_dt(dt)
    n = _check_n(n)
    _require_off_resonance(model, dt, guard, "kicked_terms")
    n_steps = 2 * n
    half = model.detunings * dt / 2

    term_a = n_steps * dt * avg_decay_rate(model, dt)
    term_b = np.sum(_segment_weights(model, dt) / np.cos(half) ** 2 * np.sin(n_steps * half) ** 2)
    term_c = 2 * np.sum(_kicked_f2(model, dt, n_steps).real)
    return KickedTerms(term_a=float(term_a), term_b=float(term_b), term_c=float(term_c))


def kicked_f_terms(model: ContinuumModel, dt: float, n: int, guard: ResonanceGuard = DEFAULT_GUARD):
    """Per-mode (F^1_k, F^2_k) of the kicked amplitude.

    F^2 is the closed form proportional to 2n; F^1 is the rest of the
    pulse-feedback sum, built from the geometric series in R = -exp(-i theta).
    """
    _check_dt(dt)
    n = _check_n(n)
    _require_off_resonance(model, dt, guard, "kicked_amplitude")
    n_steps = 2 * n

    q = -np.exp(-1j * model.detunings * dt)
    nested = q / (1 - q) * ((n_steps - 1) - geometric_sum(q, n_steps - 1))
    feedback = _segment_weights(model, dt) * nested
    f2 = _kicked_f2(model, dt, n_steps)
    return feedback - f2, f2


def kicked_amplitude(model: ContinuumModel, dt: float, n: int, guard: ResonanceGuard = DEFAULT_GUARD) -> complex:
    """alpha_s after 2n periodic kicks: 1 - 2n J(dt) - sum F^1 - sum F^2."""
    f1, f2 = kicked_f_terms(model, dt, n, guard)
    kernel = np.sum(model.coupling_weights * kernel_integral(model, dt))
    return complex(1 - 2 * n * kernel - np.sum(f1) - np.sum(f2))


def kicked_survival(model: ContinuumModel, dt: float, n: int, guard: ResonanceGuard = DEFAULT_GUARD) -> float:
    """1 - term B: the A and C terms cancel."""
    terms = kicked_terms(model, dt, n, guard)
    return _nonnegative("kicked_survival", 1.0 - terms.term_b, dt=dt, n=n)


def beta_periodic(
    model: ContinuumModel, mode_index: int, dt: float, j: int, guard: ResonanceGuard = DEFAULT_GUARD
) -> complex:
    """beta_k(j dt) under a kick at every grid point, from alpha_s = 1, beta = 0."""
    _check_dt(dt)
    j = _check_n(j, allow_zero=True)
    k = int(mode_index)
    _require_off_resonance(model, dt, guard, "beta_periodic", indices=[k])
    c = phase_integral(model, dt)[k]
    r = np.exp(1j * model.detunings[k] * dt)
    return complex(-1j * model.couplings[k] * c * (1 - (-r) ** j) / (1 + r))


# -- stochastic and decoupling sign sequences ------------------------------------------------

def beta_stochastic(model: ContinuumModel, mode_index: int, dt: float, l: int, signs: SignSequence) -> complex:
    """beta_k(l dt) when the pulse at j dt has sign xi_j = signs[j-1]."""
    _check_dt(dt)
    l = _check_n(l)
    if len(signs) < l - 1:
        raise InvalidParameterError(f"beta_stochastic needs at least {l - 1} signs for l={l}, got {len(signs)}")
    k = int(mode_index)
    seg = np.array(segment_signs(SignSequence(signs.signs[: l - 1])).signs, dtype=float)
    phasors = np.exp(1j * model.detunings[k] * dt * np.arange(l))
    c = phase_integral(model, dt)[k]
    return complex(-1j * model.couplings[k] * c * np.sum(seg * phasors))


def _check_sign_count(name, signs, n):
    if len(signs) != 2 * n:
        raise InvalidParameterError(f"{name} needs exactly 2n = {2 * n} signs, got {len(signs)}")


def stochastic_survival(model: ContinuumModel, dt: float, n: int, signs: SignSequence) -> float:
    """|G|^2 - 2 Re(F* G) for one realization xi_1..xi_2n (|F|^2 dropped)."""
    _check_dt(dt)
    n = _check_n(n)
    _check_sign_count("stochastic_survival", signs, n)
    n_steps = 2 * n

    g_squared = 1.0 - n_steps * dt * avg_decay_rate(model, dt)
    seg = np.array(segment_signs(signs).signs[:n_steps], dtype=float)
    amplitude = _phasor_sums(model, dt, seg)[-1]
    cross = np.sum(_segment_weights(model, dt) * (np.abs(amplitude) ** 2 - n_steps))
    return _nonnegative("stochastic_survival", g_squared - cross, dt=dt, n=n)


def stochastic_survival_curve(model: ContinuumModel, dt: float, signs: SignSequence) -> np.ndarray:
    """First-order survival after every prefix 0..len(signs) of one realization."""
    _check_dt(dt)
    seg = np.array(segment_signs(signs).signs[: len(signs)], dtype=float)
    sums = _phasor_sums(model, dt, seg)
    curve = 1.0 - np.abs(sums) ** 2 @ _segment_weights(model, dt)
    if curve.min() < 0:
        step = int(np.argmin(curve))
        raise PerturbativeBreakdownError("stochastic_survival_curve", float(curve[step]), dt=dt, step=step)
    return curve


def dd_survival(model: ContinuumModel, dt: float, n: int, lambdas: SignSequence) -> float:
    """|G|^2 + 2 Re(F* G) with the decoupling triple sum evaluated term by term.

    ``lambdas`` are segment signs lambda_0..lambda_{2n-1}; they need not be
    alternating, so random decoupling signs are covered too.
    """
    _check_dt(dt)
    n = _check_n(n)
    _check_sign_count("dd_survival", lambdas, n)
    n_steps = 2 * n

    g_squared = 1.0 - n_steps * dt * avg_decay_rate(model, dt)
    lam = lambdas.as_array()
    theta = model.detunings * dt
    weights = _segment_weights(model, dt)

    pair_sum = np.zeros(model.n_modes)
    for l in range(1, n_steps):
        lags = l - np.arange(l)
        pair_sum += lam[l] * (lam[:l] @ np.cos(np.outer(lags, theta)))
    cross = -2 * np.sum(weights * pair_sum)
    return _nonnegative("dd_survival", g_squared + cross, dt=dt, n=n)


# -- ensemble average and projective measurement ---------------------------------------------

def averaged_survival(model: ContinuumModel, dt: float, n: int, p_kick: float = 0.5) -> float:
    """Survival averaged over independent kicks with probability ``p_kick`` per grid point.

    With <xi> = 1 - 2p, sign correlations decay as <s_j s_m> = (1-2p)^(j-m); at
    p = 0.5 every cross term averages out and P = 1 - gamma_avg * 2n dt.
    """
    n = _check_n(n, allow_zero=True)
    return averaged_survival_steps(model, dt, 2 * n, p_kick)


def averaged_survival_steps(model: ContinuumModel, dt: float, n_steps: int, p_kick: float = 0.5) -> float:
    """Ensemble-averaged survival after any number of grid steps, odd counts included."""
    _check_dt(dt)
    n_steps = _check_n(n_steps, allow_zero=True)
    if not (0.0 <= p_kick <= 1.0):
        raise InvalidParameterError(f"p_kick must lie in [0, 1], got {p_kick!r}")

    value = 1.0 - avg_decay_rate(model, dt) * n_steps * dt
    mean_xi = 1.0 - 2.0 * p_kick
    if mean_xi != 0.0 and n_steps > 1:
        lags = np.arange(1, n_steps)
        lag_weights = (n_steps - lags) * mean_xi**lags
        correlation = lag_weights @ np.cos(np.outer(lags, model.detunings * dt))
        value -= 2 * np.sum(_segment_weights(model, dt) * correlation)
    return _nonnegative("averaged_survival", value, dt=dt, n_steps=n_steps, p_kick=p_kick)


def zeno_rate(model: ContinuumModel, dt: float) -> float:
    """gamma_ZENO = (2/dt) Re sum_k |V_ks|^2 integral_0^dt (dt - u) exp(-i delta_k u) du."""
    _check_dt(dt)
    return float(2.0 / dt * np.sum(model.coupling_weights * kernel_integral(model, dt).real))


def zeno_survival(model: ContinuumModel, dt: float, n: int, form: ZenoForm = ZenoForm.Linearized) -> float:
    """Survival after 2n ideal measurements spaced by dt."""
    n = _check_n(n, allow_zero=True)
    form = ZenoForm(form)
    rate = zeno_rate(model, dt)
    if form is ZenoForm.Linearized:
        return _nonnegative("zeno_survival", 1.0 - 2 * n * dt * rate, dt=dt, n=n, form=form.value)
    factor = 1.0 - rate * dt
    if factor < 0:
        raise PerturbativeBreakdownError("zeno_survival", factor, dt=dt, n=n, form=form.value)
    return float(factor ** (2 * n))


# -- identity suite --------------------------------------------------------------------------

def _random_model(rng, max_modes=8):
    n_modes = int(rng.integers(1, max_modes + 1))
    omegas = rng.uniform(-3.0, 3.0, n_modes)
    couplings = rng.uniform(0.005, 0.05, n_modes) * np.exp(1j * rng.uniform(0, 2 * np.pi, n_modes))
    return build_custom(float(rng.uniform(-0.5, 0.5)), zip(omegas, couplings))


def _random_case(rng):
    """A (model, dt, n) with every mode well clear of the tan singularity."""
    while True:
        model = _random_model(rng)
        dt = float(rng.uniform(0.05, 1.0))
        half = model.detunings * dt / 2
        n = int(rng.integers(1, 11))
        # first-order depletion is bounded by sum |V|^2 t^2
        if np.all(np.abs(np.cos(half)) > 0.2) and model.coupling_weights.sum() * (2 * n * dt) ** 2 < 0.5:
            return model, dt, n


def identity_suite(seed: int = 20240601) -> list[IdentityCheck]:
    """Evaluate the structural identities of the first-order formulas on seeded random grids."""
    rng = np.random.default_rng(seed)
    checks = []

    def record(name, errors, tolerance):
        worst = float(max(errors)) if errors else 0.0
        checks.append(IdentityCheck(name, worst <= tolerance, worst, tolerance, len(errors)))
        logger.info("identity %-24s max_error=%.3e tol=%.1e", name, worst, tolerance)

    errors = []
    for _ in range(200):
        model, dt, n = _random_case(rng)
        terms = kicked_terms(model, dt, n)
        errors.append(abs(terms.term_a + terms.term_c) / max(abs(terms.term_a), 1e-300))
    record("a_c_cancellation", errors, 1e-12)

    errors = []
    for _ in range(50):
        model, dt, n = _random_case(rng)
        ones = SignSequence((1,) * (2 * n))
        errors.append(abs(stochastic_survival(model, dt, n, ones) - spontaneous_survival(model, 2 * n * dt)))
    record("free_decay_reduction", errors, 1e-12)

    errors = []
    for _ in range(50):
        model, dt, n = _random_case(rng)
        errors.append(abs(dd_survival(model, dt, n, dd_sign_sequence(2 * n)) - kicked_survival(model, dt, n)))
    record("dd_equivalence", errors, 1e-12)

    errors = []
    for _ in range(100):
        model, dt, _ = _random_case(rng)
        errors.append(abs(zeno_rate(model, dt) - avg_decay_rate(model, dt)))
    record("zeno_coincidence", errors, 1e-14)

    errors = []
    for _ in range(50):
        model, dt, n = _random_case(rng)
        f1, _ = kicked_f_terms(model, dt, n)
        terms = kicked_terms(model, dt, n)
        errors.append(abs(2 * np.sum(f1.real) - terms.term_b) / max(terms.term_b, terms.term_a))
    record("f1_closed_form", errors, 1e-10)

    errors = []
    for _ in range(200):
        r = complex(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2))
        m = int(rng.integers(1, 51))
        direct = sum(r**j for j in range(1, m + 1))
        errors.append(abs(geometric_sum(r, m) - direct) / max(abs(direct), 1.0))
    record("geometric_sum", errors, 1e-13)

    errors = []
    for _ in range(50):
        model, dt, n = _random_case(rng)
        k = int(rng.integers(0, model.n_modes))
        for j in range(1, 2 * n + 1):
            kicks = SignSequence((-1,) * max(j - 1, 0))
            errors.append(abs(beta_periodic(model, k, dt, j) - beta_stochastic(model, k, dt, j, kicks)))
    record("beta_closed_form", errors, 1e-12)

    return checks
