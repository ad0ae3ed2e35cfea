import itertools

import numpy as np
import pytest

from pmlc.protocol import Params

EXAMPLE = dict(N=6, T=1, S=1, M=3, P=3, L=4, q=11, K=3, E=2, R=1)

_criteria: list[tuple[str, bool, str]] = []


def brute_force_combinations(C, files, q):
    """Independent oracle: explicit triple loop, Python ints only."""
    C = [[int(v) for v in row] for row in np.asarray(C)]
    files = [[int(v) for v in row] for row in np.asarray(files)]
    out = []
    for i in range(len(C)):
        row = []
        for j in range(len(files[0])):
            row.append(sum(C[i][m] * files[m][j] for m in range(len(files))) % q)
        out.append(row)
    return out


def random_instance(params, seed):
    rng = np.random.default_rng(seed)
    C = rng.integers(0, params.q, size=(params.P, params.M))
    files = rng.integers(0, params.q, size=(params.M, params.L))
    return C, files


def valid_grid(base: dict, Ks=None, Es=None, Rs=None):
    """All valid Params over (K, E, R) for fixed system parameters."""
    room = base["N"] - base["S"] - base["T"]
    Ks = Ks or range(1, room + 1)
    Rs = Rs or range(0, room + 1)
    Es = Es or range(1, base["L"] + 1)
    out = []
    for K, E, R in itertools.product(Ks, Es, Rs):
        p = Params(**{**base, "K": K, "E": E, "R": R})
        if not p.validate():
            out.append(p)
    return out


@pytest.fixture
def example_params():
    return Params(**EXAMPLE)


@pytest.fixture
def criterion():
    """Record an acceptance criterion's verdict for the end-of-run summary."""

    class Recorder:
        def __init__(self):
            self.name = None

        def __call__(self, name, detail=""):
            self.name, self.detail = name, detail
            return self

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            _criteria.append((self.name, exc_type is None, self.detail if exc_type is None else str(exc)))
            return False

    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _criteria:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
