import numpy as np
import pytest

from qclt.fock import FockCutoff, build_density, diagonal_state


def pure(vec, K=None):
    v = np.asarray(vec, dtype=complex)
    if K is not None and K + 1 > v.size:
        v = np.concatenate([v, np.zeros(K + 1 - v.size)])
    v = v / np.linalg.norm(v)
    return build_density(np.outer(v, v.conj()), 1, FockCutoff(v.size - 1))


def number(k):
    p = np.zeros(k + 1)
    p[k] = 1.0
    return diagonal_state(p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def sup03():
    return pure([1, 0, 0, 1], K=8)


# acceptance lines are printed as they happen and repeated in the summary
ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
