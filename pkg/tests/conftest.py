import numpy as np
import pytest
from hypothesis import strategies as st

from ednetrmab.model import GroupNetwork, StudentModel, TransitionTensor

VALID_LEARN = (0.1, 0.2, 0.3)
VALID_RETAIN = (0.5, 0.6, 0.7)

# Lines collected by the acceptance module, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def valid_tensor():
    return TransitionTensor.from_rows(VALID_LEARN, VALID_RETAIN)


def uniform_model(groups, n_arms=None, learn=VALID_LEARN, retain=VALID_RETAIN):
    network = GroupNetwork.from_groups(groups, n_arms)
    tensor = TransitionTensor.from_rows(learn, retain)
    return StudentModel(network, (tensor,) * network.n_arms)


@st.composite
def networks(draw, max_arms=12, max_topics=5):
    n = draw(st.integers(1, max_arms))
    n_topics = draw(st.integers(1, max_topics))
    membership = draw(st.lists(
        st.sets(st.integers(0, n_topics - 1), min_size=1, max_size=n_topics),
        min_size=n, max_size=n,
    ))
    return GroupNetwork(n, n_topics, tuple(membership))


def random_network(rng, n, n_topics, extra=0.2):
    membership = []
    for _ in range(n):
        topics = set(np.flatnonzero(rng.random(n_topics) < extra).tolist())
        topics.add(int(rng.integers(n_topics)))
        membership.append(topics)
    return GroupNetwork(n, n_topics, tuple(membership))
