import os

from hypothesis import HealthCheck, settings

# first calls pay for numba compilation and scipy imports; stability cases
# are drawn broadly and then filtered
settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
settings.register_profile("thorough", parent=settings.get_profile("default"), max_examples=3000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))
