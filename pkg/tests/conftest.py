import os

from hypothesis import HealthCheck, settings

# Property suites run at least 10^4 cases each; RMU_PROPERTY_CASES can raise it.
PROPERTY_CASES = max(10_000, int(os.environ.get("RMU_PROPERTY_CASES", "10000")))

settings.register_profile(
    "rmu",
    max_examples=PROPERTY_CASES,
    deadline=None,
    derandomize=True,
    database=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("rmu")
