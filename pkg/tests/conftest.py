import math

import pytest
from hypothesis import strategies as st

from curiosity_lab.envs.exercise import ExerciseEnv


def beliefs(n_min: int = 2, n_max: int = 8, min_mass: float = 0.0):
    """Normalized probability vectors."""

    def norm(ws):
        s = math.fsum(ws)
        return tuple(w / s for w in ws)

    return st.lists(st.floats(min_value=min_mass, max_value=1.0), min_size=n_min, max_size=n_max).filter(
        lambda ws: math.fsum(ws) > 1e-6
    ).map(norm)


@pytest.fixture(scope="session")
def exercise_env():
    return ExerciseEnv()


# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
