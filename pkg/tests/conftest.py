import numpy as np
import pytest
from hypothesis import strategies as st

from components.model import QuantumState, build_custom, build_flat_band


@pytest.fixture
def std_1mode():
    return build_custom(0.0, [(1.0, 0.1)])


@pytest.fixture
def weak_1mode():
    return build_custom(0.0, [(1.0, 0.02)])


@pytest.fixture
def std_flat():
    return build_flat_band(201, 20.0, 0.02, 0.0)


@pytest.fixture
def small_band():
    return build_custom(0.1, [(-1.3, 0.03), (-0.4, 0.02 + 0.01j), (0.7, 0.025), (1.9, 0.015j)])


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch):
    for name in ("KICKCTL_THREADS", "KICKCTL_DB_URL", "KICKCTL_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


finite = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)


@st.composite
def quantum_states(draw, n_modes=3):
    raw = np.array([complex(draw(finite), draw(finite)) for _ in range(n_modes + 1)])
    norm = np.linalg.norm(raw)
    if norm < 1e-6:
        raw = np.zeros(n_modes + 1, dtype=complex)
        raw[0] = 1.0
        norm = 1.0
    raw = raw / norm
    return QuantumState(alpha_s=raw[0], beta=raw[1:], time=draw(st.floats(min_value=0.0, max_value=10.0)))
