import pytest

from config.settings import Settings
from imcflab.app.factories.build_services import build_core_services


@pytest.fixture(scope="session")
def settings():
    return Settings(_env_file=None)


@pytest.fixture(scope="session")
def services(settings):
    return build_core_services(settings)


@pytest.fixture(scope="session")
def geometry_service(services):
    return services["geometry_service"]


@pytest.fixture(scope="session")
def flow_service(services):
    return services["flow_service"]


@pytest.fixture(scope="session")
def regsolver_service(services):
    return services["regsolver_service"]


@pytest.fixture(scope="session")
def isoperimetry_service(services):
    return services["isoperimetry_service"]


@pytest.fixture(scope="session")
def euclidean(geometry_service):
    return geometry_service.make_preset("euclidean")


@pytest.fixture(scope="session")
def schwarzschild(geometry_service):
    return geometry_service.make_preset("schwarzschild-areal", {"m": 1.0})


@pytest.fixture(scope="session")
def cored(geometry_service):
    return geometry_service.make_preset("cored-schwarzschild", {"m": 1.0, "b": 1.0})


@pytest.fixture(scope="session")
def neck(geometry_service):
    return geometry_service.make_preset("neck")
