import pytest

from tests.helpers import build_network, uniform_network


@pytest.fixture
def chain():
    """A -> B with Pr(a1) = 0.6, Pr(b1 | a1) = 0.9, Pr(b1 | a0) = 0.2."""
    return build_network(
        [("A", 2), ("B", 2)],
        [
            (0, (), [0.4, 0.6]),
            (1, (0,), [[0.8, 0.2], [0.1, 0.9]]),
        ],
    )


@pytest.fixture
def fork():
    """A is the parent of both B and C."""
    return build_network(
        [("A", 2), ("B", 2), ("C", 2)],
        [
            (0, (), [0.3, 0.7]),
            (1, (0,), [[0.6, 0.4], [0.25, 0.75]]),
            (2, (0,), [[0.9, 0.1], [0.2, 0.8]]),
        ],
    )


@pytest.fixture
def uniform():
    return uniform_network(4)


@pytest.fixture
def two_peaks():
    """
    A -> B whose joint is (0,0) .30, (0,1) .04, (1,0) .06, (1,1) .60: state
    (0,0) is a local peak and (1,1) the global one.
    """
    return build_network(
        [("A", 2), ("B", 2)],
        [
            (0, (), [0.34, 0.66]),
            (1, (0,), [[0.30 / 0.34, 0.04 / 0.34], [0.06 / 0.66, 0.60 / 0.66]]),
        ],
    )
