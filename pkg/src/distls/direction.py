"""Descent directions for the dual: truncated-series Newton, exact Newton, gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from distls.dual import HessianSplit
from distls.errors import DegenerateInstance, InvalidArgument, PreconditionViolation


@dataclass(frozen=True)
class DirectionRequest:
    split: HessianSplit
    g: np.ndarray
    N: int

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (self.split.n,):
            raise InvalidArgument(f"gradient has shape {g.shape}, need ({self.split.n},)")
        if self.N < 0:
            raise InvalidArgument(f"N must be >= 0, got {self.N}")
        object.__setattr__(self, "g", g)


def series_terms(split, g, N):
    """Yield ``v_0 = D^{-1} g`` and ``v_r = D^{-1} B v_{r-1}`` for r = 1..N.

    Each term needs one exchange with direct neighbors, so ``v_N`` at node
    ``i`` depends only on ``g`` within ``N`` hops.
    """
    if np.any(split.D <= 0):
        raise DegenerateInstance("Hessian diagonal has a nonpositive entry")
    v = g / split.D
    yield v
    for _ in range(N):
        v = (split.B @ v) / split.D
        yield v


def add_direction(req):
    """``d = -sum_{r<=N} v_r``, the truncated-series approximation of ``-H^+ g``."""
    d = np.zeros_like(req.g)
    for v in series_terms(req.split, req.g, req.N):
        d -= v
    return d


def dense_series_operator(split, N):
    """Build ``sum_{r<=N} D^{-1/2} (D^{-1/2} B D^{-1/2})^r D^{-1/2}`` densely.

    Test oracle only; the solver never materializes this matrix.
    """
    if np.any(split.D <= 0):
        raise DegenerateInstance("Hessian diagonal has a nonpositive entry")
    s = np.diag(1.0 / np.sqrt(split.D))
    S = s @ split.B.toarray() @ s
    term = np.eye(split.n)
    total = np.zeros((split.n, split.n))
    for _ in range(N + 1):
        total += s @ term @ s
        term = term @ S
    return total


def newton_direction_oracle(split, g, tol=1e-10):
    """Minimum-norm solution of ``H d = -g`` on the complement of the ones vector."""
    g = np.asarray(g, dtype=float)
    if abs(g.sum()) > tol * max(1.0, np.abs(g).sum()):
        raise PreconditionViolation(f"gradient is not orthogonal to ones (sum={g.sum():.3e})")
    d = -np.linalg.pinv(split.H.toarray(), hermitian=True) @ g
    return d - d.mean()


def subgradient_direction(g):
    return -np.asarray(g, dtype=float)
