import numpy as np
import pytest

from fairaudit.core import BINARY, NUMERIC, SENSITIVE, Dataset


def make_ds(X, groups, labels, mask=None, kinds=None, group_names=("A", "B"), with_dummies=True):
    """Small Dataset helper: numeric features plus (optionally) group indicator columns."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    groups = np.asarray(groups)
    mask = np.zeros((n, p), bool) if mask is None else np.asarray(mask, bool)
    names = [f"x{j}" for j in range(p)]
    kinds = list(kinds) if kinds is not None else [NUMERIC] * p
    sources = list(names)
    if with_dummies:
        K = len(group_names)
        onehot = np.eye(K)[groups]
        X = np.hstack([X, onehot])
        mask = np.hstack([mask, np.zeros((n, K), bool)])
        names += [f"race={g}" for g in group_names]
        kinds += [SENSITIVE] * K
        sources += ["race"] * K
    return Dataset(tuple(names), X, mask, groups, tuple(group_names), labels,
                   kinds=tuple(kinds), sources=tuple(sources))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CRITERIA = []


@pytest.fixture
def criterion():
    """Record a one-line PASS/FAIL verdict for the acceptance summary, then assert it."""
    def check(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        CRITERIA.append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
