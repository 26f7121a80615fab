import sys
from pathlib import Path

import numpy as np
import pytest

from opevo import baseline as B
from opevo import problems as P

STUB_WORKER = Path(__file__).resolve().parent / "stub_worker.py"


@pytest.fixture(scope="session")
def stub_worker_cmd():
    """Launch command for the in-repo protocol-conformant worker host."""
    return [sys.executable, str(STUB_WORKER)]


@pytest.fixture(scope="session")
def zdt1_anchor_traces():
    """IGD traces of 10 NSGA-II runs on ZDT1 (n_var=50, pop 100, 200 gens).

    Shared between the baseline convergence invariant and the acceptance
    anchor so the experiment runs once per test session.
    """
    inst = P.make_cmop("zdt1", n_var=50)
    traces = []
    for seed in range(10):
        _, trace = B.nsga2_run(inst, B.SolverConfig(), np.random.default_rng(seed))
        traces.append(trace)
    return np.asarray(traces)
