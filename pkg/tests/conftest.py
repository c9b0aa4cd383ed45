import numpy as np
import pytest

from lthkit.core import EmbeddingMatrix


def make_matrix(n, d, seed=0, prefix="d"):
    rng = np.random.default_rng(seed)
    return EmbeddingMatrix([f"{prefix}{i}" for i in range(n)], rng.standard_normal((n, d)).astype(np.float32))


def brute_rank(ids, scores, k, descending=True):
    """Reference ordering: score (desc or asc), then ascending id, via Python sort."""
    sign = -1.0 if descending else 1.0
    order = sorted(range(len(ids)), key=lambda i: (sign * float(scores[i]), ids[i]))
    return [ids[i] for i in order[:k]]


@pytest.fixture
def tmp(tmp_path):
    return tmp_path


# ---- acceptance reporting ----------------------------------------------------------
# test_acceptance records one line per criterion; they are printed together at the end
# of the session (and a crashed criterion still gets a FAIL line).

ACCEPTANCE: dict[int, str] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.when == "call" and name.startswith("test_criterion_"):
        n = int(name.split("_")[2])
        if report.failed and n not in ACCEPTANCE:
            msg = str(report.longrepr.reprcrash.message) if hasattr(report.longrepr, "reprcrash") else "error"
            ACCEPTANCE[n] = f"FAIL criterion {n}: {msg.splitlines()[0]}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
