import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ctselect",
    max_examples=50,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ctselect")


@pytest.fixture(scope="session")
def renewal_model():
    from ctselect import RenewalParams, build_renewal_model

    return build_renewal_model(RenewalParams(lam=3.0, k_o=14))
