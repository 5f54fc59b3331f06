import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# Property tests share the suite with multi-minute benchmark runs; a
# wall-clock deadline would make them flaky on loaded machines.
settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


def mass_sum(ops, values):
    """Mass-weighted global sum per variable (the conserved quantities)."""
    values = np.asarray(values)
    if values.ndim == 2:
        values = values[None]
    return np.array([float((ops.mass * values[i]).sum()) for i in range(values.shape[0])])
