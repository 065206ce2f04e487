import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from hmmlfd.synth import NoiseSpec, builtin_templates, synthesize  # noqa: E402

import pytest  # noqa: E402

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])


@pytest.fixture(scope="session")
def templates():
    return builtin_templates()


@pytest.fixture(scope="session")
def noisy_pick_place():
    tpl = builtin_templates()["pick_place"]
    return [synthesize(tpl, NoiseSpec(0.002, 0.005, 0.1, seed=11 + i), f"pp{i}") for i in range(3)]


@pytest.fixture(scope="session")
def noisy_stack_cup():
    tpl = builtin_templates()["stack_cup"]
    return [synthesize(tpl, NoiseSpec(0.002, 0.005, 0.1, seed=1 + i), f"sc{i}") for i in range(3)]
