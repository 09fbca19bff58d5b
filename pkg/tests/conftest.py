import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from distls.graph import DirectedGraph
from distls.problem import ExpCapacityCost, FlowProblem

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SINH1 = math.sinh(1.0)


@pytest.fixture
def triangle():
    return DirectedGraph(3, ((0, 1), (1, 2), (0, 2)))


@pytest.fixture
def path4():
    return DirectedGraph(4, ((0, 1), (1, 2), (2, 3)))


@pytest.fixture
def two_node_problem():
    return FlowProblem(DirectedGraph(2, ((0, 1),)), np.array([1.0, -1.0]), ExpCapacityCost(1.0))


@pytest.fixture
def triangle_problem(triangle):
    return FlowProblem(triangle, np.array([1.0, 0.0, -1.0]), ExpCapacityCost(1.0))
