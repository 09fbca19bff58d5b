"""Dual descent for single-commodity min-cost flow with a distributed Armijo line search."""

from distls.errors import (
    DegenerateInstance,
    InvalidArgument,
    LineSearchFailure,
    PreconditionViolation,
    ProtocolFault,
)
from distls.graph import DirectedGraph, random_connected_graph
from distls.problem import ExpCapacityCost, FlowProblem, QuadraticCost
from distls.solver import SolverConfig, solve

__all__ = [
    "DegenerateInstance",
    "DirectedGraph",
    "ExpCapacityCost",
    "FlowProblem",
    "InvalidArgument",
    "LineSearchFailure",
    "PreconditionViolation",
    "ProtocolFault",
    "QuadraticCost",
    "SolverConfig",
    "random_connected_graph",
    "solve",
]
