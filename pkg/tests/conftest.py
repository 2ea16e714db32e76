import numpy as np
import pytest
from hypothesis import settings

from zetamellin import mellin as ml
from zetamellin.checks import fit_grid
from zetamellin.moments import MomentEngine, fit_p4, install_engine

settings.register_profile("artifact", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("artifact")

ENGINE_T_MAX = 5000.0


@pytest.fixture(scope="session")
def engine():
    """Moment engine on [0, 5000], shared by every test and installed as the process default."""
    eng = MomentEngine(ENGINE_T_MAX)
    install_engine(eng)
    return eng


@pytest.fixture(scope="session")
def coeffs(engine):
    return fit_p4(fit_grid(), engine=engine)


@pytest.fixture(scope="session")
def cj(coeffs, engine):
    return ml.c_from_a(coeffs, engine=engine)


# one summary line per acceptance criterion, printed after the run
_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion_log():
    def log(number: int, passed: bool, text: str) -> None:
        _CRITERIA[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}"
    return log


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])


def close(a, b, rtol=0.0, atol=0.0):
    return np.allclose(a, b, rtol=rtol, atol=atol)
