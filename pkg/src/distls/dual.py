"""Lagrange dual of the flow problem and its derivatives.

Conventions: ``q(lam) = -sum_e phi_e(x_e(lam)) + lam'(A x(lam) - b)`` is
minimized; ``x_e(lam) = (phi_e')^{-1}(lam[tail] - lam[head])``; the gradient
is ``A x(lam) - b`` and the Hessian is the weighted Laplacian
``A diag(1 / phi''(x)) A'``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from distls.errors import DegenerateInstance, InvalidArgument
from distls.graph import _check_len, incidence_apply, incidence_transpose_apply


@dataclass(frozen=True)
class DualState:
    lam: np.ndarray
    x: np.ndarray
    g: np.ndarray
    q: float


@dataclass(frozen=True)
class HessianSplit:
    H: sp.csr_matrix
    D: np.ndarray
    B: sp.csr_matrix

    @property
    def n(self):
        return self.D.shape[0]


@dataclass(frozen=True)
class SpectralDiagnostics:
    rho_bar: float
    m: float
    M: float
    alpha_hat: float

    def sigma_bound(self, N):
        """Largest admissible Armijo parameter for the distributed search."""
        return 0.5 * (1.0 - self.rho_bar ** (N + 1))


def primal_recovery(problem, lam):
    lam = _check_len(lam, problem.n, "dual vector")
    return problem.cost.inv_deriv(incidence_transpose_apply(problem.graph, lam))


def dual_value(problem, lam):
    lam = _check_len(lam, problem.n, "dual vector")
    x = primal_recovery(problem, lam)
    resid = incidence_apply(problem.graph, x) - problem.b
    return float(-np.sum(problem.cost.value(x)) + lam @ resid)


def dual_gradient(problem, lam):
    return incidence_apply(problem.graph, primal_recovery(problem, lam)) - problem.b


def dual_state(problem, lam):
    lam = _check_len(lam, problem.n, "dual vector").copy()
    x = primal_recovery(problem, lam)
    g = incidence_apply(problem.graph, x) - problem.b
    q = float(-np.sum(problem.cost.value(x)) + lam @ g)
    return DualState(lam=lam, x=x, g=g, q=q)


def local_dual_value(problem, lam, i):
    """Node share ``q_i`` of the dual; the shares sum to ``q`` exactly.

    Each edge's cost is charged to its head node, and node ``i`` also
    carries its own price times its conservation residual.
    """
    if not 0 <= i < problem.n:
        raise InvalidArgument(f"node id {i} outside [0, {problem.n})")
    lam = _check_len(lam, problem.n, "dual vector")
    x = primal_recovery(problem, lam)
    g = incidence_apply(problem.graph, x) - problem.b
    into = problem.graph.heads == i
    return float(-np.sum(problem.cost.value(x[into])) + lam[i] * g[i])


def local_dual_values(problem, lam):
    """All ``q_i`` at once."""
    lam = _check_len(lam, problem.n, "dual vector")
    x = primal_recovery(problem, lam)
    g = incidence_apply(problem.graph, x) - problem.b
    charged = np.bincount(problem.graph.heads, weights=problem.cost.value(x), minlength=problem.n)
    return -charged + lam * g


def node_increments(problem, lam, d, alpha):
    """Per-node split of ``q(lam + alpha d) - q(lam)``.

    Entry ``j`` is ``d_j * integral_0^alpha g_j(lam + t d) dt``; it needs
    only node ``j``'s incident edges and the prices and directions of its
    neighbors. The entries sum to the exact increment of ``q`` and each has
    slope ``d_j g_j`` at ``alpha = 0``.
    """
    lam = _check_len(lam, problem.n, "dual vector")
    d = _check_len(d, problem.n, "direction")
    graph = problem.graph
    u = incidence_transpose_apply(graph, lam)
    w = alpha * incidence_transpose_apply(graph, d)
    mean_flow = problem.cost.secant_flow(u, w)
    return alpha * d * (incidence_apply(graph, mean_flow) - problem.b)


def dual_increment(problem, lam, d, alpha):
    """``q(lam + alpha d) - q(lam)`` without cancellation between two large values."""
    return float(np.sum(node_increments(problem, lam, d, alpha)))


def edge_weights(problem, x):
    return 1.0 / problem.cost.second(x)


def laplacian_split(graph, weights):
    """Split the weighted Laplacian ``A diag(weights) A'`` into ``D - B``."""
    t, h = graph.tails, graph.heads
    D = np.bincount(t, weights=weights, minlength=graph.n) + np.bincount(h, weights=weights, minlength=graph.n)
    rows = np.concatenate([t, h])
    cols = np.concatenate([h, t])
    vals = np.concatenate([weights, weights])
    B = sp.csr_matrix((vals, (rows, cols)), shape=(graph.n, graph.n))
    H = (sp.diags(D) - B).tocsr()
    return HessianSplit(H=H, D=D, B=B)


def dual_hessian(problem, lam):
    x = primal_recovery(problem, lam)
    return laplacian_split(problem.graph, edge_weights(problem, x))


def alpha_hat(sigma, m, M):
    """Stepsize lower bound ``2 (1 - sigma) m^2 / M^2``."""
    return 2.0 * (1.0 - sigma) * m * m / (M * M)


def _normalized_offdiag(split):
    if np.any(split.D <= 0):
        raise DegenerateInstance("Hessian diagonal has a nonpositive entry")
    s = 1.0 / np.sqrt(split.D)
    return s, (s[:, None] * split.B.toarray()) * s[None, :]


def spectral_diagnostics(split, N, sigma):
    """Dense eigen-analysis of the splitting at desk scale.

    ``rho_bar`` is the second-largest eigenvalue modulus of
    ``D^{-1/2} B D^{-1/2}`` after deflating its Perron vector
    ``D^{1/2} 1``; ``m`` and ``M`` are the extreme eigenvalues of the
    truncated inverse on the subspace orthogonal to the ones vector.
    """
    if not 0 < sigma < 0.5:
        raise InvalidArgument(f"sigma must lie in (0, 1/2), got {sigma}")
    if N < 0:
        raise InvalidArgument(f"N must be >= 0, got {N}")
    s, S = _normalized_offdiag(split)
    mu, V = np.linalg.eigh(S)
    perron = np.sqrt(split.D)
    perron /= np.linalg.norm(perron)
    overlap = np.abs(V.T @ perron)
    keep = np.ones(len(mu), dtype=bool)
    keep[int(np.argmax(overlap))] = False
    rho_bar = float(np.max(np.abs(mu[keep]))) if keep.any() else 0.0

    series = np.array([np.sum(mu_k ** np.arange(N + 1)) for mu_k in mu])
    Hbar = (s[:, None] * (V * series) @ V.T) * s[None, :]
    basis = sla.null_space(np.ones((1, split.n)))
    ev = np.linalg.eigvalsh(basis.T @ Hbar @ basis)
    m, M = float(ev[0]), float(ev[-1])
    return SpectralDiagnostics(rho_bar=min(rho_bar, 1.0), m=m, M=M, alpha_hat=alpha_hat(sigma, m, M))
