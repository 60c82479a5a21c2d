import numpy as np
import pytest
from hypothesis import settings

from interp_solve import kernels
from interp_solve.problems import quadratic_field

# first calls build cached Lipschitz constants; wall-clock deadlines only add flakes
settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture
def bilinear():
    """phi = x y, F(x, y) = (y, -x)."""
    return quadratic_field(1.0, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["python", "compiled"])
def backend(request):
    """Run the test once per kernel backend, restoring the default after."""
    if request.param == "compiled" and kernels.compiled is None:
        pytest.skip("compiled extension not built")
    previous = kernels.BACKEND_NAME
    kernels.use(request.param)
    yield request.param
    kernels.use(previous)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
