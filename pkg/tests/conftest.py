import pytest

from eqsat.keygen import generate_keypair, generate_keypair_divided
from eqsat.model import Mode, Params
from eqsat.rng import deterministic

TINY = Params(k=2, n=8, m=2, e=3)
FULL_M2 = Params(k=4, n=512, m=20, e=768, q=4)
FULL_M3 = FULL_M2.replace(mode=Mode.M3, b=4)
SMALL_M4 = Params(k=2, n=10, m=10, e=16, b=4, q=4, mode=Mode.M4)

ACCEPTANCE_RESULTS: list[str] = []


@pytest.fixture
def rng():
    return deterministic(12345)


@pytest.fixture(scope="session")
def tiny_keys():
    return generate_keypair(TINY, deterministic(1))


@pytest.fixture(scope="session")
def full_keys():
    return generate_keypair(FULL_M2, deterministic(2024))


@pytest.fixture(scope="session")
def m4_keys():
    return generate_keypair_divided(SMALL_M4, deterministic(4))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
