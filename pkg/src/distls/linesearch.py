"""Armijo backtracking: centralized, per-node local, and min-consensus.

Local rule at node ``i``: accept ``alpha`` when the node's local objective
change ``Q_i(alpha)`` is at most ``sigma * alpha * s_i``, with
``s_i = sum_{j within N hops of i} d_j g_j``. Two local objectives exist:

``"increment"`` (default)
    ``Q_i(alpha) = sum_{j within N hops} Delta_j(alpha)`` where ``Delta_j``
    are the node increments of :func:`distls.dual.node_increments`. Its slope
    at zero is exactly ``s_i``, so the rule is a genuine Armijo test on a
    neighborhood share of the dual; with ``N >= diameter`` it reduces to the
    centralized rule.
``"node-value"``
    ``Q_i(alpha) = q_i(lam + alpha d) - q_i(lam)`` with the head-charged
    node shares of :func:`distls.dual.local_dual_values`. Kept for
    comparison: its slope at zero is not ``s_i`` and the search typically
    backtracks to the slack floor.

A node whose ``s_i >= 0`` has no descent certificate; by default it
abstains (``alpha_i = 1``) and the stepsize is set by the other nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from distls.dual import dual_increment, local_dual_values, node_increments
from distls.errors import InvalidArgument, LineSearchFailure

ARMIJO_SLACK = 1e-12
RULES = ("increment", "node-value")


@dataclass(frozen=True)
class LineSearchParams:
    sigma: float = 0.1
    beta: float = 0.5
    max_backtracks: int = 60
    N: int = 1
    rule: str = "increment"
    abstain_uncertified: bool = True

    def __post_init__(self):
        if not 0 < self.sigma < 0.5:
            raise InvalidArgument(f"sigma must lie in (0, 1/2), got {self.sigma}")
        if not 0 < self.beta < 1:
            raise InvalidArgument(f"beta must lie in (0, 1), got {self.beta}")
        if self.max_backtracks < 0:
            raise InvalidArgument("max_backtracks must be >= 0")
        if self.N < 0:
            raise InvalidArgument(f"N must be >= 0, got {self.N}")
        if self.rule not in RULES:
            raise InvalidArgument(f"rule must be one of {RULES}, got {self.rule!r}")


@dataclass(frozen=True)
class LineSearchOutcome:
    """Accepted stepsize plus the audit trail.

    ``armijo_lhs``/``armijo_rhs`` are the two sides of the accepted test,
    both measured relative to the value at ``alpha = 0``. In distributed
    mode they are per-node arrays evaluated at the consensus stepsize.
    """

    alpha: float
    backtrack_count: int
    armijo_lhs: object
    armijo_rhs: object
    per_node_alphas: np.ndarray | None = None
    per_node_backtracks: np.ndarray | None = None
    uncertified: np.ndarray | None = None


def centralized_backtracking(problem, lam, d, g, params):
    d = np.asarray(d, dtype=float)
    slope = float(np.dot(g, d))
    if not np.any(d):
        return LineSearchOutcome(alpha=1.0, backtrack_count=0, armijo_lhs=0.0, armijo_rhs=0.0)
    alpha = 1.0
    for t in range(params.max_backtracks + 1):
        lhs = dual_increment(problem, lam, d, alpha)
        rhs = params.sigma * alpha * slope
        if lhs <= rhs + ARMIJO_SLACK:
            return LineSearchOutcome(alpha=alpha, backtrack_count=t, armijo_lhs=lhs, armijo_rhs=rhs)
        alpha *= params.beta
    raise LineSearchFailure(
        f"centralized search exceeded {params.max_backtracks} backtracks",
        diagnostics={"slope": slope, "last_alpha": alpha / params.beta, "last_lhs": lhs},
    )


def local_armijo_rhs_sum(i, d, g, hood):
    """``sum_{j in hood} d_j g_j``; ``i`` must be the neighborhood's center."""
    if hood.center != i:
        raise InvalidArgument(f"neighborhood is centred at {hood.center}, not {i}")
    idx = np.fromiter(sorted(hood.members), dtype=np.intp)
    return float(np.dot(np.asarray(d)[idx], np.asarray(g)[idx]))


def neighborhood_sums(mask, v):
    """``sum_{j within N hops of i} v_j`` for every ``i``."""
    return mask @ v


def local_objective_changes(problem, lam, d, alpha, mask, rule="increment"):
    """``Q_i(alpha)`` for every node under the chosen local objective."""
    if rule == "increment":
        return neighborhood_sums(mask, node_increments(problem, lam, d, alpha))
    if rule == "node-value":
        lam = np.asarray(lam, dtype=float)
        return local_dual_values(problem, lam + alpha * np.asarray(d)) - local_dual_values(problem, lam)
    raise InvalidArgument(f"unknown rule {rule!r}")


def local_backtracking(i, problem, lam, d, g, params, mask=None):
    """Smallest-``k`` stepsize ``beta^k`` accepted by node ``i``'s local rule."""
    if not 0 <= i < problem.n:
        raise InvalidArgument(f"node id {i} outside [0, {problem.n})")
    if mask is None:
        mask = problem.graph.neighborhood_mask(params.N)
    row = mask.getrow(i)
    s_i = float((row @ (np.asarray(d) * np.asarray(g)))[0])
    if params.abstain_uncertified and s_i >= 0:
        return 1.0
    alpha = 1.0
    for _ in range(params.max_backtracks + 1):
        change = float(local_objective_changes(problem, lam, d, alpha, mask, params.rule)[i])
        if change <= params.sigma * alpha * s_i + ARMIJO_SLACK:
            return alpha
        alpha *= params.beta
    raise LineSearchFailure(
        f"node {i} exceeded {params.max_backtracks} backtracks",
        diagnostics={"node": i, "rhs_sum": s_i, "last_change": change},
    )


def consensus_stepsize(per_node_alphas):
    a = np.asarray(per_node_alphas, dtype=float)
    if a.size == 0:
        raise InvalidArgument("no stepsizes to agree on")
    return float(a.min())


def distributed_backtracking(problem, lam, d, g, params, mask=None):
    """All local searches at once, then the minimum over nodes.

    Every node tries ``1, beta, beta^2, ...`` in lock step; a node stops at
    its first acceptance. Results match running :func:`local_backtracking`
    at each node separately.
    """
    if mask is None:
        mask = problem.graph.neighborhood_mask(params.N)
    d = np.asarray(d, dtype=float)
    s = neighborhood_sums(mask, d * np.asarray(g, dtype=float))
    uncertified = s >= 0
    n = problem.n
    alphas = np.ones(n)
    backtracks = np.zeros(n, dtype=int)
    done = uncertified.copy() if params.abstain_uncertified else np.zeros(n, dtype=bool)
    alpha = 1.0
    for t in range(params.max_backtracks + 1):
        if done.all():
            break
        change = local_objective_changes(problem, lam, d, alpha, mask, params.rule)
        ok = ~done & (change <= params.sigma * alpha * s + ARMIJO_SLACK)
        alphas[ok] = alpha
        backtracks[ok] = t
        done |= ok
        alpha *= params.beta
    if not done.all():
        bad = np.flatnonzero(~done)
        raise LineSearchFailure(
            f"{bad.size} node(s) exceeded {params.max_backtracks} backtracks",
            diagnostics={"nodes": bad.tolist(), "rhs_sums": s[bad].tolist()},
        )
    a = consensus_stepsize(alphas)
    return LineSearchOutcome(
        alpha=a,
        backtrack_count=int(backtracks.max()),
        armijo_lhs=local_objective_changes(problem, lam, d, a, mask, params.rule),
        armijo_rhs=params.sigma * a * s,
        per_node_alphas=alphas,
        per_node_backtracks=backtracks,
        uncertified=uncertified,
    )
