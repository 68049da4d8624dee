import time

import numpy as np
import pytest

from lieqho.protocols import PROTOCOL_NAMES, build_protocol
from lieqho.verification import compare_paths, run_factorized

EPSILONS = (2.0, 1000.0)
ORACLE_SAMPLES = 81

# filled by test_acceptance; printed at the end of the session
ACCEPTANCE_LINES: list[str] = []
# wall-clock seconds of session fixtures, for runtime criteria
TIMINGS: dict[str, float] = {}


@pytest.fixture(scope="session")
def protocols():
    return {(name, eps): build_protocol(name, eps) for name in PROTOCOL_NAMES for eps in EPSILONS}


@pytest.fixture(scope="session")
def factorized_runs(protocols):
    out = {}
    for key, p in protocols.items():
        ts = np.unique(np.concatenate([np.linspace(0, p.t_end, ORACLE_SAMPLES), p.checkpoints]))
        out[key] = run_factorized(p.cfg, p.t_end, ts)
    return out


@pytest.fixture(scope="session")
def oracle_runs(protocols, factorized_runs):
    out = {}
    start = time.perf_counter()
    for key, p in protocols.items():
        run = factorized_runs[key]
        out[key] = compare_paths(p.cfg, p.t_end, run.times, N=128, fidelity_min=p.fidelity_min,
                                 factorized=run)
    TIMINGS["oracle_runs"] = time.perf_counter() - start
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
