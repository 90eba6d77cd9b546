"""Shared fixtures and a suite-wide gate on trajectory invariants.

Every simulated trajectory must satisfy the structural identities of its
update rule (zero-sum auxiliary rows, the mean-state recursion, the unrolled
running-sum form, gradient tracking) to 1e-12 at every step.  The engine
already measures the worst violation per run; wrapping its batch kernel here
enforces the bound on every run launched by any test in the suite, not just
the ones that think to ask.
"""

import numpy as np
import pytest

import dpdopt
from dpdopt import ScheduleParams, engine

INVARIANT_TOL = 1e-12


@pytest.fixture(autouse=True, scope="session")
def invariant_gate():
    orig = engine._batched

    def gated(pr, W, sp, algorithm, T, seeds, x0, retain, xstar):
        traces = orig(pr, W, sp, algorithm, T, seeds, x0, retain, xstar)
        for tr in traces:
            for key, val in tr.diagnostics.items():
                assert val <= INVARIANT_TOL, (
                    f"{algorithm}: {key} = {val:.3e} exceeds {INVARIANT_TOL:g}"
                )
        return traces

    engine._batched = gated
    yield
    engine._batched = orig


@pytest.fixture(scope="session")
def ring4():
    return dpdopt.metropolis_weights(dpdopt.ring(4))


@pytest.fixture(scope="session")
def er10():
    g = dpdopt.connected_erdos_renyi(10, 0.35, seed=0)
    return g, dpdopt.metropolis_weights(g)


@pytest.fixture(scope="session")
def problem10():
    return dpdopt.random_problem(10, 3, 2, (0.5, 1.5), seed=0)


@pytest.fixture
def sched():
    return ScheduleParams(
        gamma=0.05, beta=10.0, q1=0.97, q2=0.99, epsilon=1.0, delta=1.0
    )


def all_close(a, b, tol):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a.shape == b.shape and np.all(np.abs(a - b) <= tol)
