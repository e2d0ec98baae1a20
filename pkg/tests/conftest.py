import pytest

from causalkinetics.reactions import compile_mass_action, parse_network

LV_TEXT = """\
A -> 2 A @ k1 = 0.1
A + B -> 2 B @ k2 = 0.05
B -> 0 @ k3 = 0.05
"""

CONSUMER_TEXT = """\
A -> 2 A @ k1 = 0.6
B -> 2 B @ k2 = 0.4
A + C -> 2 C @ k3 = 0.5
B + C -> 2 C @ k4 = 0.3
C -> 0 @ k5 = 0.7
"""


@pytest.fixture(scope="session")
def lv_net():
    return parse_network(LV_TEXT)


@pytest.fixture(scope="session")
def lv_model(lv_net):
    return compile_mass_action(lv_net).with_initial([1.0, 1.5])


@pytest.fixture(scope="session")
def consumer_net():
    return parse_network(CONSUMER_TEXT)


@pytest.fixture(scope="session")
def consumer_model(consumer_net):
    return compile_mass_action(consumer_net).with_initial([1.0, 1.0, 1.0])


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
