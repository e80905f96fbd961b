import numpy as np
import pytest
from hypothesis import given, settings

from components.errors import InvalidParameterError
from components.model import QuantumState
from components.pulses import (
    PulseKind,
    PulseSequence,
    SignSequence,
    apply_phase_kick,
    apply_projection,
    apply_pulse,
    dd_sign_sequence,
    kick_signs,
    periodic_sequence,
    segment_signs,
    sequence_from_json,
    sequence_from_signs,
    sequence_to_json,
    stochastic_sequence,
)
from conftest import quantum_states


class TestPhaseKick:
    def test_flips_bound_amplitude(self):
        kicked = apply_phase_kick(QuantumState(alpha_s=1.0, beta=[0.0]))
        assert kicked.alpha_s == -1.0
        assert kicked.beta[0] == 0.0

    def test_continuum_untouched(self):
        kicked = apply_phase_kick(QuantumState(alpha_s=0.6, beta=[0.8j]))
        assert kicked.alpha_s == -0.6
        assert kicked.beta[0] == 0.8j

    @settings(max_examples=1000)
    @given(quantum_states())
    def test_involution_and_norm(self, state):
        twice = apply_phase_kick(apply_phase_kick(state))
        assert twice.alpha_s == state.alpha_s
        np.testing.assert_array_equal(twice.beta, state.beta)
        assert apply_phase_kick(state).norm() == state.norm()


class TestProjection:
    def test_clears_continuum(self):
        projected = apply_projection(QuantumState(alpha_s=0.9, beta=[0.1, 0.2]))
        assert projected.alpha_s == 0.9
        np.testing.assert_array_equal(projected.beta, [0, 0])

    def test_fixed_point(self):
        state = QuantumState(alpha_s=1.0, beta=[0.0])
        projected = apply_projection(state)
        assert projected.alpha_s == state.alpha_s
        np.testing.assert_array_equal(projected.beta, state.beta)

    @settings(max_examples=1000)
    @given(quantum_states())
    def test_idempotent_and_norm_nonincreasing(self, state):
        once = apply_projection(state)
        twice = apply_projection(once)
        assert twice.alpha_s == once.alpha_s
        np.testing.assert_array_equal(twice.beta, once.beta)
        assert once.norm() <= state.norm() + 1e-15

    def test_identity_pulse(self):
        state = QuantumState(alpha_s=0.3, beta=[0.1j])
        assert apply_pulse(state, PulseKind.Identity) is state


class TestSequences:
    def test_periodic_kicks(self):
        seq = periodic_sequence(0.5, 4, PulseKind.PhaseKick)
        assert seq.events == (PulseKind.PhaseKick,) * 4
        assert seq.event_times() == [0.5, 1.0, 1.5, 2.0]

    def test_single_projection(self):
        seq = periodic_sequence(0.5, 1, PulseKind.Projection)
        assert seq.events == (PulseKind.Projection,)
        assert seq.event_times() == [0.5]

    @pytest.mark.parametrize("dt, count", [(0.5, 0), (0.0, 3), (-0.1, 3), (float("nan"), 3)])
    def test_rejects_bad_input(self, dt, count):
        with pytest.raises(InvalidParameterError):
            periodic_sequence(dt, count, PulseKind.PhaseKick)

    def test_accepts_kind_codes(self):
        assert PulseSequence(0.1, ("K", "P", "I")).events == (PulseKind.PhaseKick, PulseKind.Projection, PulseKind.Identity)

    def test_describe(self):
        text = periodic_sequence(0.25, 3, PulseKind.PhaseKick).describe()
        assert "dt=0.25" in text
        assert "PhaseKick=3" in text

    def test_json_round_trip(self):
        seq = PulseSequence(0.2, (PulseKind.PhaseKick, PulseKind.Identity, PulseKind.Projection), label="mixed")
        assert sequence_from_json(sequence_to_json(seq)) == seq

    def test_json_malformed(self):
        with pytest.raises(InvalidParameterError):
            sequence_from_json('{"dt": 0.1, "events": ["X"]}')


class TestStochastic:
    def test_never_kicks(self):
        seq, signs = stochastic_sequence(0.1, 50, 0.0, 7)
        assert set(seq.events) == {PulseKind.Identity}
        assert set(signs.signs) == {1}

    def test_always_kicks(self):
        seq, signs = stochastic_sequence(0.1, 50, 1.0, 7)
        assert seq.events == periodic_sequence(0.1, 50, PulseKind.PhaseKick).events
        assert set(signs.signs) == {-1}

    def test_deterministic(self):
        assert stochastic_sequence(0.1, 100, 0.5, 42) == stochastic_sequence(0.1, 100, 0.5, 42)

    def test_prefix_stable(self):
        _, short = stochastic_sequence(0.1, 20, 0.5, 2**64 - 1)
        _, long = stochastic_sequence(0.1, 200, 0.5, 2**64 - 1)
        assert long.signs[:20] == short.signs

    def test_signs_match_events(self):
        seq, signs = stochastic_sequence(0.1, 300, 0.3, 11)
        for event, xi in zip(seq.events, signs.signs):
            assert (event is PulseKind.PhaseKick) == (xi == -1)

    @pytest.mark.parametrize("p", [-0.1, 1.5, float("nan")])
    def test_rejects_probability(self, p):
        with pytest.raises(InvalidParameterError):
            stochastic_sequence(0.1, 10, p, 0)

    @pytest.mark.parametrize("seed", [-1, 2**64, 1.5])
    def test_rejects_seed(self, seed):
        with pytest.raises(InvalidParameterError):
            stochastic_sequence(0.1, 10, 0.5, seed)

    @pytest.mark.slow
    def test_fair_coin_mean(self):
        draws = 10**5
        _, signs = stochastic_sequence(0.01, draws, 0.5, 20240601)
        assert abs(signs.as_array().mean()) <= 4 / np.sqrt(draws)


class TestSigns:
    def test_dd_signs(self):
        assert dd_sign_sequence(4).signs == (1, -1, 1, -1)
        assert dd_sign_sequence(1).signs == (1,)

    def test_dd_alternates(self):
        lam = dd_sign_sequence(31).signs
        assert all(a * b == -1 for a, b in zip(lam, lam[1:]))

    def test_dd_count(self):
        with pytest.raises(InvalidParameterError):
            dd_sign_sequence(0)

    def test_rejects_non_unit_entries(self):
        with pytest.raises(InvalidParameterError):
            SignSequence((1, 0, -1))

    def test_segment_signs_accumulate(self):
        assert segment_signs(SignSequence((-1, 1, -1, -1))).signs == (1, -1, -1, 1, -1)

    def test_all_kicks_alternate(self):
        assert segment_signs(SignSequence((-1,) * 5)).signs == dd_sign_sequence(6).signs

    def test_kick_signs_invert_segment_signs(self):
        lam = SignSequence((1, 1, -1, -1, 1, -1))
        assert segment_signs(kick_signs(lam)).signs[: len(lam)] == lam.signs

    def test_kick_signs_need_leading_plus(self):
        with pytest.raises(InvalidParameterError):
            kick_signs(SignSequence((-1, 1)))

    def test_sequence_from_signs(self):
        seq = sequence_from_signs(0.3, SignSequence((1, -1, -1)))
        assert seq.events == (PulseKind.Identity, PulseKind.PhaseKick, PulseKind.PhaseKick)
