"""Fixtures: the six-page example web and its frozen reference values."""

import numpy as np
import pytest

from aggrank import Partition, WebGraph, link_matrix

# 0-based edge list; out-degrees (2, 2, 3, 3, 1, 2)
SIXPAGE_EDGES = [
    (0, 1), (0, 3),
    (1, 0), (1, 2),
    (2, 1), (2, 3), (2, 5),
    (3, 2), (3, 4), (3, 5),
    (4, 5),
    (5, 3), (5, 4),
]

# groups: {0,1}, {2}, {3,4,5}
SIXPAGE_GROUPS = [[0, 1], [2], [3, 4, 5]]

SIXPAGE_X_STAR = np.array([0.0614, 0.0857, 0.122, 0.214, 0.214, 0.302])
SIXPAGE_X_PRIME = np.array([0.0566, 0.0920, 0.125, 0.212, 0.213, 0.302])
SIXPAGE_XTILDE_STAR = np.array([0.147, 0.122, 0.731, -0.0121, -0.0294, -0.0294])
SIXPAGE_XI_PRIME = np.array([0.1486, 0.125, 0.727])
SIXPAGE_ERR_1NORM = 0.0188
SIXPAGE_KAPPA = 0.1418
SIXPAGE_NODE_PARAMS = np.array([0.5, 0.5, 1.0, 1 / 3, 0.0, 0.0])

SIXPAGE_A11 = np.array([
    [0.5, 0.333, 0.0],
    [0.25, 0.0, 0.111],
    [0.25, 0.667, 0.889],
])
SIXPAGE_A21 = np.array([
    [0.0, -0.167, 0.0],
    [0.167, 0.111, -0.130],
    [-0.0833, -0.222, -0.0185],
])
SIXPAGE_A22P = np.array([
    [0.0, 0.0, 0.0],
    [0.0, -0.167, -0.5],
    [0.0, -0.167, -0.5],
])
SIXPAGE_SOLVE_OP = np.array([
    [0.0, -0.167, 0.0],
    [0.174, 0.161, -0.113],
    [-0.0758, -0.172, -0.00177],
])
SIXPAGE_A_INT = np.array([
    [-1 / 2, 1 / 2, 0, 0, 0, 0],
    [1 / 2, -1 / 2, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0],
    [0, 0, 0, -2 / 3, 0, 1 / 2],
    [0, 0, 0, 1 / 3, -1, 1 / 2],
    [0, 0, 0, 1 / 3, 1, -1],
])
SIXPAGE_A_EXT = np.array([
    [-1 / 2, 0, 0, 0, 0, 0],
    [0, -1 / 2, 1 / 3, 0, 0, 0],
    [0, 1 / 2, -1, 1 / 3, 0, 0],
    [1 / 2, 0, 1 / 3, -1 / 3, 0, 0],
    [0, 0, 0, 0, 0, 0],
    [0, 0, 1 / 3, 0, 0, 0],
])

# Expected gossip columns at the default probabilities (alpha-independent):
# per group, per choice 0..g_i
SIXPAGE_GOSSIP_COLUMNS = {
    0: [np.array([1.0, 0.0, 0.0]),
        np.array([0.5, 0.5, 0.0]),
        np.array([0.5, 0.0, 0.5])],
    1: [np.array([0.0, 1.0, 0.0]),
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 0.0, 1.0])],
    2: [np.array([0.0, 0.0, 1.0]),
        np.array([0.0, 1 / 9, 8 / 9])],
}


@pytest.fixture(scope="session")
def sixpage_graph() -> WebGraph:
    return WebGraph.from_edges(6, SIXPAGE_EDGES)


@pytest.fixture(scope="session")
def sixpage_partition() -> Partition:
    return Partition.from_groups(SIXPAGE_GROUPS, 6)


@pytest.fixture(scope="session")
def sixpage_matrix(sixpage_graph):
    return link_matrix(sixpage_graph)
