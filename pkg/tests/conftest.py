import math

import numpy as np
import pytest

from plateau_ns.run_record import RunMeta, RunRecord


def make_run(log_like, births=None, n_live=None, dim=1, seed=0, termination="evidence_remainder"):
    ll = np.asarray(log_like, dtype=float)
    lb = np.full(ll.size, -math.inf) if births is None else np.asarray(births, dtype=float)
    coords = np.linspace(0.0, 1.0, ll.size * dim).reshape(ll.size, dim)
    meta = RunMeta(n_live_target=n_live or max(ll.size, 1), seed=seed,
                   likelihood_id="test", termination=termination, dimension=dim)
    return RunRecord(ll, lb, coords, meta)


@pytest.fixture
def run_factory():
    return make_run


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""
    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
