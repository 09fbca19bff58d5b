"""Edge cost models and the primal min-cost flow instance."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from distls.errors import InvalidArgument
from distls.graph import (
    DirectedGraph,
    _check_len,
    format_graph,
    incidence_apply,
    parse_graph_lines,
    random_connected_graph,
)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


class EdgeCost(ABC):
    """Strictly convex, twice differentiable per-edge cost ``phi``.

    Parameters may be scalars or length-``E`` arrays; every method is
    elementwise.
    """

    # below this |w| the secant is integrated by quadrature instead of differencing
    secant_switch = 1e-2

    @abstractmethod
    def value(self, x): ...

    @abstractmethod
    def deriv(self, x): ...

    @abstractmethod
    def second(self, x): ...

    @abstractmethod
    def inv_deriv(self, y): ...

    @abstractmethod
    def conjugate(self, u):
        """``psi(u) = sup_x (u x - phi(x))``; note ``psi' = inv_deriv``."""

    @abstractmethod
    def at(self, e):
        """Scalar cost model for edge ``e``."""

    def secant_flow(self, u, w):
        """Mean of ``inv_deriv`` over the segment ``[u, u + w]``.

        Equals ``(psi(u + w) - psi(u)) / w``; the difference quotient loses
        all precision as ``w -> 0``, so short segments use 8-point
        Gauss-Legendre instead.
        """
        u, w = np.broadcast_arrays(np.asarray(u, float), np.asarray(w, float))
        big = np.abs(w) > self.secant_switch
        safe_w = np.where(big, w, 1.0)
        diff = (self.conjugate(u + w) - self.conjugate(u)) / safe_w
        pts = u[..., None] + _GL_T * w[..., None]
        quad = self._inv_deriv_grid(pts) @ _GL_W
        return np.where(big, diff, quad)

    def _inv_deriv_grid(self, pts):
        return self.inv_deriv(pts)


class ExpCapacityCost(EdgeCost):
    """``phi(x) = exp(c x) + exp(-c x)``; larger ``c`` means tighter capacity."""

    def __init__(self, c=1.0):
        c = np.asarray(c, dtype=float)
        if np.any(c <= 0) or not np.all(np.isfinite(c)):
            raise InvalidArgument("capacity coefficient c must be positive and finite")
        self.c = c

    def __repr__(self):
        return f"ExpCapacityCost(c={self.c!r})"

    def value(self, x):
        return 2.0 * np.cosh(self.c * x)

    def deriv(self, x):
        return 2.0 * self.c * np.sinh(self.c * x)

    def second(self, x):
        return 2.0 * self.c**2 * np.cosh(self.c * x)

    def inv_deriv(self, y):
        return np.arcsinh(y / (2.0 * self.c)) / self.c

    def conjugate(self, u):
        z = u / (2.0 * self.c)
        # cosh(asinh z) = sqrt(1 + z^2)
        return u * np.arcsinh(z) / self.c - 2.0 * np.sqrt(1.0 + z * z)

    def _inv_deriv_grid(self, pts):
        c = self.c if self.c.ndim == 0 else self.c[..., None]
        return np.arcsinh(pts / (2.0 * c)) / c

    def at(self, e):
        return self if self.c.ndim == 0 else ExpCapacityCost(float(self.c[e]))


class QuadraticCost(EdgeCost):
    """``phi(x) = a x^2 / 2``; the dual is quadratic, so Newton steps are exact."""

    def __init__(self, a=1.0):
        a = np.asarray(a, dtype=float)
        if np.any(a <= 0) or not np.all(np.isfinite(a)):
            raise InvalidArgument("curvature a must be positive and finite")
        self.a = a

    def __repr__(self):
        return f"QuadraticCost(a={self.a!r})"

    def value(self, x):
        return 0.5 * self.a * np.square(x)

    def deriv(self, x):
        return self.a * x

    def second(self, x):
        return self.a * np.ones_like(np.asarray(x, float))

    def inv_deriv(self, y):
        return y / self.a

    def conjugate(self, u):
        return np.square(u) / (2.0 * self.a)

    def secant_flow(self, u, w):
        return (np.asarray(u, float) + 0.5 * np.asarray(w, float)) / self.a

    def at(self, e):
        return self if self.a.ndim == 0 else QuadraticCost(float(self.a[e]))


@dataclass(frozen=True)
class FlowProblem:
    graph: DirectedGraph
    b: np.ndarray
    cost: EdgeCost

    def __post_init__(self):
        b = _check_len(self.b, self.graph.n, "rate vector b").copy()
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        if abs(b.sum()) > 1e-9 * max(1.0, np.abs(b).sum()):
            raise InvalidArgument(f"rates must sum to zero for Ax=b to be solvable; sum={b.sum():.3e}")
        for name in ("c", "a"):
            param = getattr(self.cost, name, None)
            if param is not None and np.ndim(param) == 1 and len(param) != self.graph.E:
                raise InvalidArgument(f"per-edge cost parameter has length {len(param)}, need {self.graph.E}")

    @property
    def n(self):
        return self.graph.n

    @property
    def E(self):
        return self.graph.E


def primal_objective(problem, x):
    """Total cost ``f(x) = sum_e phi_e(x_e)``; the reward maximized is ``-f``."""
    x = _check_len(x, problem.E, "edge vector")
    return float(np.sum(problem.cost.value(x)))


def feasibility_residual(problem, x):
    return incidence_apply(problem.graph, x) - problem.b


def balanced_rate_vector(n, sources=(), sinks=()):
    b = np.zeros(n)
    for node, rate in sources:
        b[node] += rate
    for node, rate in sinks:
        b[node] -= rate
    total_in = sum(r for _, r in sources)
    total_out = sum(r for _, r in sinks)
    if abs(total_in - total_out) > 1e-12:
        raise InvalidArgument(f"source total {total_in} != sink total {total_out}")
    return b


def random_rates(n, seed, scale=5.0):
    """Gaussian rates centred to sum zero.

    Every node ends up a source or a sink. Drawn from
    ``default_rng([seed, 1])`` so the stream is independent of the graph's.
    """
    rng = np.random.default_rng([seed, 1])
    b = scale * rng.standard_normal(n)
    return b - b.mean()


def random_problem(n, E, seed, rate_scale=5.0, c=1.0):
    graph = random_connected_graph(n, E, seed)
    return FlowProblem(graph, random_rates(n, seed, rate_scale), ExpCapacityCost(c))


def format_problem(problem):
    text = format_graph(problem.graph)
    text += "b " + " ".join(repr(float(v)) for v in problem.b) + "\n"
    c = getattr(problem.cost, "c", None)
    if c is not None and np.ndim(c) == 0:
        text += f"c {float(c)!r}\n"
    return text


def parse_problem_text(text):
    """Parse a graph file optionally followed by ``b ...`` and ``c <value>`` lines.

    Returns ``(graph, b or None, c)``.
    """
    graph, rest = parse_graph_lines(text.splitlines())
    b, c = None, 1.0
    for ln in rest:
        toks = ln.split()
        key, vals = toks[0], toks[1:]
        try:
            if key == "b":
                if len(vals) != graph.n:
                    raise InvalidArgument(f"b line has {len(vals)} values, need {graph.n}")
                b = np.array([float(v) for v in vals])
            elif key == "c":
                if len(vals) != 1:
                    raise InvalidArgument("c line must hold exactly one value")
                c = float(vals[0])
            else:
                raise InvalidArgument(f"unknown line {ln!r}")
        except ValueError as exc:
            if isinstance(exc, InvalidArgument):
                raise
            raise InvalidArgument(f"bad number in line {ln!r}") from exc
    return graph, b, c


def read_problem(path):
    graph, b, c = parse_problem_text(Path(path).read_text())
    if b is None:
        raise InvalidArgument(f"{path}: no 'b' line")
    return FlowProblem(graph, b, ExpCapacityCost(c))


def write_problem(problem, path):
    Path(path).write_text(format_problem(problem))
