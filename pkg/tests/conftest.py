import pytest
from hypothesis import settings

from cavitycool.params import EffectiveParams

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def fig_params():
    """Weak-confinement working point used across the tests."""
    return EffectiveParams(g_eff=1e-4, delta_eff=0.5, nu=0.05, eta=0.1, kappa=1.0)
