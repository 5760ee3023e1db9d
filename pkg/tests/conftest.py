import sys

import numpy as np
import pytest

from floquet.cocycle import Deterministic, Dist, IIDEnsemble, LeslieRandom, MarkovSwitch, ScalarScaled


def uniform(lo, hi):
    return Dist("uniform", (float(lo), float(hi)))


SYM = ((2.0, 1.0), (1.0, 2.0))


@pytest.fixture
def sym():
    return Deterministic(matrix=SYM)


@pytest.fixture
def iid2():
    return IIDEnsemble(n=2, entry=uniform(1, 2))


@pytest.fixture
def iid3():
    return IIDEnsemble(n=3, entry=uniform(0.5, 2))


@pytest.fixture
def markov2():
    return MarkovSwitch(states=(((2.0, 1.0), (1.0, 2.0)), ((1.0, 3.0), (0.5, 1.0))),
                        transition=((0.9, 0.1), (0.3, 0.7)))


@pytest.fixture
def leslie3():
    return LeslieRandom(fecundity=(uniform(0.2, 0.6), uniform(0.8, 1.6), uniform(0.5, 1.0)),
                        survival=(uniform(0.4, 0.9), uniform(0.3, 0.8)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def all_models():
    """One instance of every variant (for parametrized laws)."""
    return [
        Deterministic(matrix=SYM),
        IIDEnsemble(n=3, entry=uniform(0.5, 2)),
        ScalarScaled(base=SYM, log_scalar=Dist("normal", (0.1, 0.5))),
        LeslieRandom(fecundity=(uniform(0.2, 0.6), uniform(0.8, 1.6), uniform(0.5, 1.0)),
                     survival=(uniform(0.4, 0.9), uniform(0.3, 0.8))),
        MarkovSwitch(states=(((2.0, 1.0), (1.0, 2.0)), ((1.0, 3.0), (0.5, 1.0))),
                     transition=((0.9, 0.1), (0.3, 0.7))),
    ]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
