import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from components.errors import AlignmentError, InvalidParameterError
from components.model import (
    ContinuumModel,
    Mode,
    QuantumState,
    build_custom,
    build_flat_band,
    golden_rule_rate,
    initial_state,
    memory_kernel,
    model_from_json,
    model_to_json,
    scale_coupling,
    zero_coupling,
)


class TestFlatBand:
    def test_single_cell(self):
        model = build_flat_band(1, 2.0, 0.1, 0.0)
        assert model.n_modes == 1
        assert model.omegas[0] == 0.0
        assert model.couplings[0] == 0.1

    def test_two_cells(self):
        model = build_flat_band(2, 2.0, 0.1, 0.0)
        np.testing.assert_allclose(model.omegas, [-0.5, 0.5])

    def test_desk_band(self, std_flat):
        spacing = np.diff(std_flat.omegas)
        assert std_flat.n_modes == 201
        assert std_flat.omegas.min() > -10.0
        assert std_flat.omegas.max() < 10.0
        np.testing.assert_allclose(spacing, 20.0 / 201, rtol=1e-12)
        assert spacing[0] == pytest.approx(0.0995, abs=1e-4)

    def test_centred_on_bound_state(self):
        model = build_flat_band(5, 1.0, 0.1, 3.0)
        assert model.omegas.mean() == pytest.approx(3.0)

    @pytest.mark.parametrize(
        "args",
        [(0, 2.0, 0.1, 0.0), (3, 0.0, 0.1, 0.0), (3, -1.0, 0.1, 0.0), (3, math.inf, 0.1, 0.0), (3, 2.0, math.nan, 0.0)],
    )
    def test_rejects_bad_parameters(self, args):
        with pytest.raises(InvalidParameterError):
            build_flat_band(*args)


class TestCustom:
    def test_passthrough(self, std_1mode):
        assert std_1mode.omega_s == 0.0
        assert std_1mode.modes == (Mode(1.0, 0.1),)

    def test_sorted_by_frequency(self):
        model = build_custom(0.0, [(0.5, 0.1), (-0.5, 0.1)])
        assert [m.omega_k for m in model.modes] == [-0.5, 0.5]

    def test_ties_keep_input_order(self):
        model = build_custom(0.0, [(1.0, 0.3), (0.0, 0.1), (1.0, 0.2)])
        assert [m.v_ks for m in model.modes] == [0.1, 0.3, 0.2]

    def test_rebuild_is_identical(self):
        pairs = [(0.3, 0.1), (-2.0, 0.2j), (0.3, 0.05)]
        assert build_custom(0.0, pairs) == build_custom(0.0, pairs)

    def test_empty_list(self):
        with pytest.raises(InvalidParameterError):
            build_custom(0.0, [])

    def test_non_finite_entry(self):
        with pytest.raises(InvalidParameterError):
            build_custom(0.0, [(math.nan, 0.1)])
        with pytest.raises(InvalidParameterError):
            build_custom(0.0, [(1.0, complex(0.1, math.inf))])

    def test_model_needs_modes(self):
        with pytest.raises(InvalidParameterError):
            ContinuumModel(omega_s=0.0, modes=())


class TestMemoryKernel:
    def test_at_zero(self, std_1mode):
        assert memory_kernel(std_1mode, 0.0) == pytest.approx(0.01 + 0j, rel=1e-14)

    def test_at_pi(self, std_1mode):
        value = memory_kernel(std_1mode, math.pi)
        assert value.real == pytest.approx(-0.01, rel=1e-14)
        assert abs(value.imag) < 1e-16

    def test_real_at_zero_for_band(self, std_flat):
        value = memory_kernel(std_flat, 0.0)
        assert value.imag == 0.0
        assert value.real == pytest.approx(201 * 0.02**2, rel=1e-14)

    @given(st.floats(min_value=-50.0, max_value=50.0))
    def test_hermitian_symmetry(self, t):
        model = build_custom(0.2, [(-1.0, 0.1), (0.4, 0.05j), (2.5, 0.02 + 0.03j)])
        forward = memory_kernel(model, t)
        backward = memory_kernel(model, -t)
        assert abs(backward - forward.conjugate()) <= 1e-14 * max(1.0, abs(forward))

    def test_rejects_infinite_time(self, std_1mode):
        with pytest.raises(InvalidParameterError):
            memory_kernel(std_1mode, math.inf)


class TestGoldenRule:
    def test_single_mode_fallback(self, std_1mode):
        assert golden_rule_rate(std_1mode) == 0.0

    def test_flat_band(self, std_flat):
        assert golden_rule_rate(std_flat) == pytest.approx(2 * math.pi * 0.02**2 * 201 / 20, rel=1e-12)
        assert golden_rule_rate(std_flat) == pytest.approx(0.02527, abs=2e-5)

    def test_quadratic_in_coupling(self, std_flat):
        assert golden_rule_rate(scale_coupling(std_flat, 2.0)) == pytest.approx(4 * golden_rule_rate(std_flat))

    def test_degenerate_modes_merge(self):
        split = build_custom(0.0, [(-1.0, 0.1), (0.0, 0.1), (0.0, 0.1), (1.0, 0.1)])
        merged = build_custom(0.0, [(-1.0, 0.1), (0.0, math.sqrt(2) * 0.1), (1.0, 0.1)])
        assert golden_rule_rate(split) == pytest.approx(golden_rule_rate(merged))


class TestState:
    def test_initial_state(self, std_flat):
        state = initial_state(std_flat)
        assert state.alpha_s == 1.0
        assert state.beta.shape == (201,)
        assert state.norm() == 1.0
        assert state.survival() == 1.0

    def test_beta_is_read_only(self, std_1mode):
        state = initial_state(std_1mode)
        with pytest.raises(ValueError):
            state.beta[0] = 1.0

    def test_alignment(self, std_flat):
        state = QuantumState(alpha_s=1.0, beta=np.zeros(3))
        with pytest.raises(AlignmentError):
            state.check_aligned(std_flat)

    def test_norm_bound(self):
        QuantumState(alpha_s=0.6, beta=[0.8j]).check_normalized()
        QuantumState(alpha_s=1.0 + 2e-10, beta=[0.0]).check_normalized()
        with pytest.raises(InvalidParameterError):
            QuantumState(alpha_s=1.0, beta=[1e-4]).check_normalized()

    def test_replace_keeps_other_fields(self):
        state = QuantumState(alpha_s=0.6, beta=[0.8j], time=2.0)
        moved = state.replace(time=3.0)
        assert moved.alpha_s == 0.6
        assert moved.beta[0] == 0.8j
        assert moved.time == 3.0


class TestCouplingHelpers:
    def test_zero_coupling(self, std_flat):
        silent = zero_coupling(std_flat)
        assert np.all(silent.couplings == 0)
        np.testing.assert_array_equal(silent.omegas, std_flat.omegas)

    def test_scale(self, std_1mode):
        assert scale_coupling(std_1mode, 0.5).couplings[0] == pytest.approx(0.05)


class TestJson:
    def test_lossless_round_trip(self):
        model = build_custom(0.1 / 3, [(math.pi, complex(1 / 7, -2 / 9)), (-1e-300, 0.1), (2.0 / 3, 1e-17j)])
        assert model_from_json(model_to_json(model)) == model

    def test_layout(self, std_1mode):
        assert model_to_json(std_1mode) == '{"omega_s": 0.0, "modes": [[1.0, 0.1, 0.0]]}'

    @pytest.mark.parametrize("text", ["not json", "{}", '{"omega_s": 0.0, "modes": []}', '{"omega_s": 0.0, "modes": [[1.0]]}'])
    def test_malformed(self, text):
        with pytest.raises(InvalidParameterError):
            model_from_json(text)
