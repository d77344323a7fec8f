import pytest
from hypothesis import HealthCheck, settings

from stagcalc.mesh import build_quad_mesh, build_tri_hex_mesh, build_voronoi_mesh

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def quad8():
    return build_quad_mesh(8, 8)


@pytest.fixture(scope="session")
def trihex2():
    return build_tri_hex_mesh(2)


@pytest.fixture(scope="session")
def voronoi64():
    return build_voronoi_mesh(64, lloyd_iters=20)


@pytest.fixture(scope="session", params=["quad", "trihex", "voronoi"])
def any_mesh(request, quad8, trihex2, voronoi64):
    return {"quad": quad8, "trihex": trihex2, "voronoi": voronoi64}[request.param]


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
