import numpy as np
import pytest

import aqucb.agent
import aqucb.harness
from aqucb.harness import visit_sum_check

# every completed AQ-UCB run in the session, checked against the visit-count inequality
VISIT_SUM_RECORD = []


@pytest.fixture(scope="session", autouse=True)
def record_visit_sums():
    original = aqucb.agent.run_aqucb

    def recording(mdp, agg, sched, K, seed, **kw):
        res = original(mdp, agg, sched, K, seed, **kw)
        VISIT_SUM_RECORD.append(visit_sum_check(res.state, K))
        return res

    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(aqucb.agent, "run_aqucb", recording)
        mp.setattr(aqucb.harness, "run_aqucb", recording)
        yield


def pytest_collection_modifyitems(session, config, items):
    # acceptance runs last so its visit-count criterion sees the whole session
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


def pytest_sessionfinish(session, exitstatus):
    bad = [c for c in VISIT_SUM_RECORD if not c.ok]
    if VISIT_SUM_RECORD:
        print(f"\nvisit-count inequality: {len(VISIT_SUM_RECORD) - len(bad)}/{len(VISIT_SUM_RECORD)} runs ok")
    if bad:
        session.exitstatus = 1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def hand_chain():
    """Deterministic 2-state, 2-action, H=2 instance with a hand-solved optimum.

    Stage 1: action 0 keeps state 0 / moves 1 -> 0, action 1 moves to state 1.
    """
    from aqucb.mdp import EpisodicMdp

    P = np.zeros((1, 2, 2, 2))
    P[0, 0, 0, 0] = 1.0
    P[0, 0, 1, 1] = 1.0
    P[0, 1, 0, 0] = 1.0
    P[0, 1, 1, 1] = 1.0
    R = np.array([[[0.5, 0.0], [0.3, 0.1]],
                  [[0.2, 0.1], [0.0, 1.0]]])
    return EpisodicMdp(2, 2, 2, 0, P, R)


@pytest.fixture
def chain2():
    return hand_chain()
