import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vomc.model import CtwPrior, generate_sequence, make_rng, sample_ctw_source, sample_initial_context

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_VERDICTS: dict[int, str] = {}
N_CRITERIA = 9


def pytest_terminal_summary(terminalreporter):
    ran = any("test_acceptance" in r.nodeid for rs in terminalreporter.stats.values() for r in rs
              if hasattr(r, "nodeid"))
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        terminalreporter.write_line(ACCEPTANCE_VERDICTS.get(k, f"criterion {k} [NOT RUN] deselected or errored before a verdict"))


def random_source(seed, A=3, D=2, lam=0.15, n=100, alpha=0.5):
    rng = make_rng(seed)
    prior = CtwPrior.symmetric(D, lam, alpha, A)
    tree = sample_ctw_source(prior, rng)
    seq = generate_sequence(tree, n, sample_initial_context(A, D, rng), rng)
    return prior, tree, seq


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def abcabbc():
    return np.array([0, 1, 2, 0, 1, 1, 2])
