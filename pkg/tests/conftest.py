import numpy as np
import pytest

from condlab.instances import NO, YES, EquivParams, InstancePair, gen_equivalence
from condlab.rng import RandomSource

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    def emit(number: int, name: str, ok: bool, detail: str = ""):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {name} {detail}".rstrip()
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return emit


def small_pair(label: str = NO, seed: int = 0, params=(256, 1, 4, 2)) -> InstancePair:
    return gen_equivalence(EquivParams.lab(*params), label, RandomSource(seed))


def support_elems(pair: InstancePair, r) -> np.ndarray:
    return np.sort(pair.support[r.start:r.stop])


@pytest.fixture
def lab_no():
    return gen_equivalence(EquivParams.lab(1 << 20, 4, 8, 4), NO, RandomSource(11))


@pytest.fixture
def lab_yes():
    return gen_equivalence(EquivParams.lab(1 << 20, 4, 8, 4), YES, RandomSource(12))
