import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def system():
    from nfcbms.system import RunConfig, build_system

    def make(**kw):
        return build_system(RunConfig(**kw))

    return make
