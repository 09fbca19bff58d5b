"""Outer dual-descent loop with trajectory capture."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from distls.direction import DirectionRequest, add_direction, subgradient_direction
from distls.dual import dual_hessian, dual_state, primal_recovery, spectral_diagnostics
from distls.errors import InvalidArgument, LineSearchFailure
from distls.linesearch import (
    LineSearchParams,
    centralized_backtracking,
    distributed_backtracking,
)
from distls.problem import primal_objective
from distls.simnet import assemble_network, message_audit, run_iteration

MODES = ("subgradient-fixed", "addn-centralized-ls", "addn-distributed-ls")
TERMINATIONS = ("converged", "max-iter", "line-search-failure")


@dataclass(frozen=True)
class SolverConfig:
    N: int = 1
    mode: str = "addn-distributed-ls"
    sigma: float = 0.1
    beta: float = 0.5
    fixed_step: float = 1e-2
    grad_tol: float = 1e-8
    max_iter: int = 500
    seed: int = 0
    use_simulator: bool = False
    max_backtracks: int = 60
    rule: str = "increment"
    abstain_uncertified: bool = True
    # recompute spectral quantities every iteration (dense, slow)
    diagnostics: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgument(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.grad_tol <= 0:
            raise InvalidArgument("grad_tol must be positive")
        if self.max_iter < 1:
            raise InvalidArgument("max_iter must be >= 1")
        if self.N < 0:
            raise InvalidArgument("N must be >= 0")
        if self.mode == "subgradient-fixed" and self.fixed_step <= 0:
            raise InvalidArgument("fixed_step must be positive")
        if self.use_simulator and self.mode != "addn-distributed-ls":
            raise InvalidArgument("the simulator backend runs only addn-distributed-ls")
        self.linesearch_params()

    def linesearch_params(self):
        return LineSearchParams(
            sigma=self.sigma, beta=self.beta, max_backtracks=self.max_backtracks,
            N=self.N, rule=self.rule, abstain_uncertified=self.abstain_uncertified,
        )

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class IterationRecord:
    """One trajectory row; ``alpha`` is NaN on the final row (no step taken)."""

    k: int
    q: float
    primal: float
    feasibility: float
    alpha: float
    grad_norm: float
    backtracks: int
    rounds: int
    messages: int

    FIELDS = ("k", "q", "primal", "feasibility", "alpha", "grad_norm", "backtracks", "rounds", "messages")

    def row(self):
        return tuple(getattr(self, f) for f in self.FIELDS)


@dataclass
class SolveResult:
    """Final iterate, trajectory and per-step audit data.

    ``steps[k]`` is ``(lam_k, d_k)`` for every step taken; ``outcomes[k]`` is
    the line-search outcome (or simulator report) of that step.
    """

    lam: np.ndarray
    x: np.ndarray
    g: np.ndarray
    trajectory: list
    termination: str
    iterations_to_unit_stepsize: int | None
    outcomes: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    round_logs: list = field(default_factory=list)
    audits: list = field(default_factory=list)
    spectral: list = field(default_factory=list)
    error: Exception | None = None

    @property
    def converged(self):
        return self.termination == "converged"

    @property
    def alphas(self):
        return [r.alpha for r in self.trajectory if not math.isnan(r.alpha)]


def initial_lambda(n, policy="zeros"):
    if policy != "zeros":
        raise InvalidArgument(f"unsupported initialization policy {policy!r}")
    return np.zeros(n)


def iterations_to_unit_stepsize(traj):
    """Smallest ``k`` after which every step is a unit step; None if the last step is not."""
    alphas = [r.alpha if isinstance(r, IterationRecord) else float(r) for r in traj]
    alphas = [a for a in alphas if not math.isnan(a)]
    k = len(alphas)
    while k > 0 and alphas[k - 1] == 1.0:
        k -= 1
    if alphas and k == len(alphas):
        return None
    return k


def _record(problem, k, st, alpha, backtracks=0, rounds=0, messages=0):
    feas = float(np.linalg.norm(st.g))
    return IterationRecord(
        k=k, q=st.q, primal=primal_objective(problem, st.x), feasibility=feas,
        alpha=alpha, grad_norm=feas, backtracks=int(backtracks), rounds=int(rounds), messages=int(messages),
    )


def sigma_admissible(problem, lam, config):
    """Spectral check of ``sigma < (1 - rho_bar^(N+1)) / 2`` at ``lam``."""
    diag = spectral_diagnostics(dual_hessian(problem, lam), config.N, config.sigma)
    return config.sigma < diag.sigma_bound(config.N), diag


def solve(problem, config=SolverConfig()):
    n = problem.n
    lam = initial_lambda(n)
    params = config.linesearch_params() if config.mode != "subgradient-fixed" else None
    distributed = config.mode == "addn-distributed-ls"
    result = SolveResult(lam=lam, x=None, g=None, trajectory=[], termination="max-iter",
                         iterations_to_unit_stepsize=None)
    if distributed:
        ok, diag = sigma_admissible(problem, lam, config)
        result.spectral.append(diag)
        if not ok:
            warnings.warn(
                f"sigma={config.sigma} is not below (1 - rho_bar^(N+1))/2 = {diag.sigma_bound(config.N):.4g} "
                f"(rho_bar={diag.rho_bar:.4g}); unit steps are not guaranteed", RuntimeWarning, stacklevel=2)
    mask = problem.graph.neighborhood_mask(config.N) if distributed and not config.use_simulator else None
    net = assemble_network(problem, lam) if config.use_simulator else None

    for k in range(config.max_iter + 1):
        st = dual_state(problem, lam)
        if net is not None:
            try:
                net, log, rep = run_iteration(net, params, k=k, grad_tol=config.grad_tol,
                                              gradient_only=k == config.max_iter)
            except LineSearchFailure as exc:
                result.trajectory.append(_record(problem, k, st, math.nan, rounds=net.log.rounds,
                                                 messages=net.log.messages))
                result.termination, result.error = "line-search-failure", exc
                break
            result.round_logs.append(log)
            result.audits.append(message_audit(log, config.N, net.diam, net.guard_trips))
            if rep.converged or k == config.max_iter:
                result.trajectory.append(_record(problem, k, st, math.nan, rounds=log.rounds,
                                                 messages=log.messages))
                result.termination = "converged" if rep.converged else "max-iter"
                break
            result.outcomes.append(rep)
            result.steps.append((rep.lam, rep.d))
            result.trajectory.append(_record(problem, k, st, rep.alpha, rep.per_node_backtracks.max(),
                                             log.rounds, log.messages))
            lam = rep.lam_next
            continue

        small = np.max(np.abs(st.g)) <= config.grad_tol
        if small or k == config.max_iter:
            result.trajectory.append(_record(problem, k, st, math.nan))
            result.termination = "converged" if small else "max-iter"
            break
        if config.mode == "subgradient-fixed":
            d, alpha, bt = subgradient_direction(st.g), config.fixed_step, 0
        else:
            split = dual_hessian(problem, lam)
            d = add_direction(DirectionRequest(split, st.g, config.N))
            if config.diagnostics:
                result.spectral.append(spectral_diagnostics(split, config.N, config.sigma))
            try:
                if distributed:
                    out = distributed_backtracking(problem, lam, d, st.g, params, mask)
                else:
                    out = centralized_backtracking(problem, lam, d, st.g, params)
            except LineSearchFailure as exc:
                result.trajectory.append(_record(problem, k, st, math.nan))
                result.termination, result.error = "line-search-failure", exc
                break
            result.outcomes.append(out)
            alpha, bt = out.alpha, out.backtrack_count
        result.trajectory.append(_record(problem, k, st, alpha, bt))
        result.steps.append((lam, d))
        lam = lam + alpha * d

    result.lam = lam
    result.x = primal_recovery(problem, lam)
    result.g = dual_state(problem, lam).g
    result.iterations_to_unit_stepsize = iterations_to_unit_stepsize(result.trajectory)
    return result
