import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

finite = dict(allow_nan=False, allow_infinity=False)

couplings = st.floats(0.05, 2.0, **finite)
widths = st.floats(0.2, 5.0, **finite)
detunings = st.floats(-3.0, 3.0, **finite)
mode_dicts = st.fixed_dictionaries({"g": couplings, "gamma": widths, "dw": detunings})
mode_lists = st.lists(mode_dicts, min_size=1, max_size=4)

complex_moment = st.builds(
    complex, st.floats(-2.0, 2.0, **finite), st.floats(-2.0, 2.0, **finite)
)
# G~_0 kept away from 0 so that the pole series is non-degenerate
leading_moment = st.builds(
    complex, st.floats(0.2, 2.0, **finite), st.floats(-1.0, 1.0, **finite)
)


def moment_tables(n):
    return st.tuples(leading_moment, *([complex_moment] * n)).map(np.array)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
