"""Synchronous message-passing simulator for one distributed descent iteration.

Every node owns only its price, its rate, its incident edges and a list of
1-hop neighbors. Each round, every node composes messages from its own state
and its last inbox, the engine checks that every destination is a direct
neighbor, and all messages are delivered together. Anything a node learns
about the rest of the network arrives this way.

N-hop aggregation is flooding of ``(origin, value)`` records for ``N``
rounds; a node sums the records it holds in origin order so the result
does not depend on delivery order.

Phases of :func:`run_iteration`, with their round cost:

``gradient``      1 round: exchange prices, then flows, ``g_i`` and ``D_i``
``direction-r``   ``N`` rounds: one series term per exchange
``rhs``           ``max(N, 1)`` rounds: share ``d_i`` and flood ``d_i g_i``
``linesearch-t``  ``N`` rounds per trial: flood the node increments
``consensus-s``   ``ceil(diam / N)`` stages of ``N`` rounds: flood the min
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from distls.errors import InvalidArgument, LineSearchFailure, ProtocolFault
from distls.graph import diameter
from distls.linesearch import ARMIJO_SLACK


@dataclass
class NodeState:
    id: int
    lam: float
    b: float
    edge_ids: np.ndarray
    peers: np.ndarray
    signs: np.ndarray
    cost: object
    neighbors: tuple
    scratch: dict = field(default_factory=dict)

    @property
    def incident_edges(self):
        return tuple(int(e) for e in self.edge_ids)


@dataclass(frozen=True, slots=True)
class Message:
    src: int
    dst: int
    round: int
    tag: str
    payload: object


@dataclass(frozen=True)
class RoundEntry:
    phase: str
    round: int
    messages: int


@dataclass
class RoundLog:
    k: int
    entries: list = field(default_factory=list)
    consensus_stages: int = 0
    consensus_agree_stage: int = 0
    trials: np.ndarray | None = None

    def phase_rounds(self, prefix):
        return sum(1 for e in self.entries if _phase_family(e.phase) == prefix)

    def phase_messages(self, prefix):
        return sum(e.messages for e in self.entries if _phase_family(e.phase) == prefix)

    @property
    def rounds(self):
        return len(self.entries)

    @property
    def messages(self):
        return sum(e.messages for e in self.entries)

    def lines(self):
        return [f"{self.k} {e.phase} {e.round} {e.messages}" for e in self.entries]


def _phase_family(phase):
    return phase.split("-", 1)[0]


@dataclass(frozen=True)
class StepReport:
    """Observer view of one iteration, gathered after the protocol ran."""

    lam: np.ndarray
    g: np.ndarray
    d: np.ndarray | None = None
    rhs_sums: np.ndarray | None = None
    per_node_alphas: np.ndarray | None = None
    per_node_backtracks: np.ndarray | None = None
    alpha: float = math.nan
    lam_next: np.ndarray | None = None
    converged: bool = False


class Network:
    """Round engine. Owns all node state between rounds."""

    def __init__(self, nodes, diam):
        self.nodes = nodes
        self.diam = int(diam)
        self._adj = [frozenset(nd.neighbors) for nd in nodes]
        self.inbox = [[] for _ in nodes]
        self.guard_trips = 0
        self.log = RoundLog(k=0)

    @property
    def n(self):
        return len(self.nodes)

    def communicate(self, phase, compose):
        """One synchronous round; ``compose(node, send)`` issues the node's messages."""
        rnd = self.log.rounds + 1
        pending = [[] for _ in self.nodes]
        count = 0
        for nd in self.nodes:
            src, adj = nd.id, self._adj[nd.id]

            def send(dst, tag, payload, src=src, adj=adj):
                if dst not in adj:
                    self.guard_trips += 1
                    raise ProtocolFault(f"node {src} tried to message non-neighbor {dst}")
                pending[dst].append(Message(src, dst, rnd, tag, payload))

            compose(nd, send)
        for box in pending:
            count += len(box)
        self.inbox = pending
        self.log.entries.append(RoundEntry(phase, rnd, count))

    def local(self, fn):
        """Local computation step: ``fn(node, inbox)`` for every node, no messages."""
        for nd in self.nodes:
            fn(nd, self.inbox[nd.id])

    def gather(self, key):
        """Observer read of one scratch scalar at every node (never used by handlers)."""
        return np.array([nd.scratch[key] for nd in self.nodes], dtype=float)

    def flood(self, phase, key, out_key, radius):
        """Sum ``scratch[key]`` over each node's ``radius``-hop neighborhood."""
        for nd in self.nodes:
            nd.scratch["_known"] = {nd.id: nd.scratch[key]}
            nd.scratch["_fresh"] = ((nd.id, nd.scratch[key]),)
        for _ in range(radius):
            self.communicate(phase, _send_fresh)
            self.local(_merge_fresh)
        for nd in self.nodes:
            known = nd.scratch.pop("_known")
            nd.scratch.pop("_fresh")
            nd.scratch[out_key] = sum(known[o] for o in sorted(known))

    def min_consensus(self, key, out_key, N):
        """Flood the minimum of ``scratch[key]`` in stages of ``max(N, 1)`` rounds.

        Runs ``ceil(diam / max(N, 1))`` stages, enough for the minimum to
        cross the whole graph. Returns ``(stages, agree_stage)``; the second
        is the first stage after which every node already held the global
        minimum, found by an observer check that the nodes never see.
        """
        hop = max(N, 1)
        stages = -(-self.diam // hop)
        target = float(self.gather(key).min())
        for nd in self.nodes:
            nd.scratch[out_key] = nd.scratch[key]
        agree = 0 if np.all(self.gather(out_key) == target) else None
        for st in range(1, stages + 1):
            for _ in range(hop):
                self.communicate(f"consensus-{st}",
                                 lambda nd, send: _broadcast(nd, send, "min", nd.scratch[out_key]))
                self.local(lambda nd, inbox: _take_min(nd, inbox, out_key))
            if agree is None and np.all(self.gather(out_key) == target):
                agree = st
        return stages, stages + 1 if agree is None else agree


def _broadcast(nd, send, tag, payload):
    for j in nd.neighbors:
        send(j, tag, payload)


def _send_fresh(nd, send):
    fresh = nd.scratch["_fresh"]
    if fresh:
        _broadcast(nd, send, "records", fresh)


def _merge_fresh(nd, inbox, pick=None):
    known = nd.scratch["_known"]
    fresh = []
    for msg in inbox:
        for origin, value in (msg.payload if pick is None else msg.payload[pick]):
            if origin not in known:
                known[origin] = value
                fresh.append((origin, value))
    nd.scratch["_fresh"] = tuple(fresh)


def _seq_sum(values):
    # left-to-right from zero, the order scatter-add uses
    return sum(values.tolist(), 0.0)


def assemble_network(problem, lambda0):
    """One node per graph node; each edge record is held by both endpoints."""
    lambda0 = np.asarray(lambda0, dtype=float)
    graph = problem.graph
    if lambda0.shape != (graph.n,):
        raise InvalidArgument(f"lambda0 must have length {graph.n}")
    nodes = []
    for i in range(graph.n):
        eids = np.array(graph.incident_edges[i], dtype=np.intp)
        tails = graph.tails[eids]
        outgoing = tails == i
        peers = np.where(outgoing, graph.heads[eids], tails)
        cost = _restrict_cost(problem.cost, eids)
        nodes.append(NodeState(
            id=i,
            lam=float(lambda0[i]),
            b=float(problem.b[i]),
            edge_ids=eids,
            peers=peers,
            signs=np.where(outgoing, 1.0, -1.0),
            cost=cost,
            neighbors=graph.adjacency[i],
        ))
    return Network(nodes, diameter(graph))


def _restrict_cost(cost, eids):
    for name in ("c", "a"):
        param = getattr(cost, name, None)
        if param is not None and np.ndim(param) == 1:
            return type(cost)(param[eids])
    return cost


def disassemble(net):
    return np.array([nd.lam for nd in net.nodes])


def replicated_edge_records(net):
    return sum(len(nd.edge_ids) for nd in net.nodes)


def _peer_values(nd, inbox, pick=None):
    got = {msg.src: (msg.payload if pick is None else msg.payload[pick]) for msg in inbox}
    return np.array([got[int(p)] for p in nd.peers], dtype=float)


def _out_minus_in(nd, vals):
    out = nd.signs > 0
    return _seq_sum(vals[out]) - _seq_sum(vals[~out])


def _gradient_step(nd, inbox):
    s = nd.scratch
    s["u"] = nd.signs * (nd.lam - _peer_values(nd, inbox))
    x = nd.cost.inv_deriv(s["u"])
    s["g"] = _out_minus_in(nd, x) - nd.b
    s["w"] = 1.0 / nd.cost.second(x)
    out = nd.signs > 0
    s["D"] = _seq_sum(s["w"][out]) + _seq_sum(s["w"][~out])


def _series_step(nd, inbox):
    s = nd.scratch
    nbr_v = _peer_values(nd, inbox)
    out = nd.signs > 0
    wv = s["w"] * nbr_v
    s["v"] = (_seq_sum(wv[out]) + _seq_sum(wv[~out])) / s["D"]
    s["d"] -= s["v"]


def _increment_step(alpha):
    def step(nd, inbox):
        s = nd.scratch
        mean_flow = nd.cost.secant_flow(s["u"], alpha * s["dw"])
        s["delta"] = alpha * s["d"] * (_out_minus_in(nd, mean_flow) - nd.b)
    return step


def run_iteration(net, params, k=0, grad_tol=None, gradient_only=False):
    """Run one full iteration as a protocol.

    If ``grad_tol`` is given and every node's ``|g_i|`` is already within it,
    the iteration stops after the gradient phase (an observer check, the
    same stopping test the in-memory solver uses) and prices are unchanged.
    ``gradient_only`` stops there unconditionally.

    Returns ``(net, log, report)``; ``net`` is updated in place.
    """
    if params.rule != "increment":
        raise InvalidArgument("the simulator implements only the 'increment' local rule")
    N = params.N
    net.log = log = RoundLog(k=k)
    lam = disassemble(net)

    net.communicate("gradient", lambda nd, send: _broadcast(nd, send, "lam", nd.lam))
    net.local(_gradient_step)
    g = net.gather("g")
    converged = grad_tol is not None and np.max(np.abs(g)) <= grad_tol
    if converged or gradient_only:
        return net, log, StepReport(lam=lam, g=g, converged=converged)

    for nd in net.nodes:
        nd.scratch["v"] = nd.scratch["g"] / nd.scratch["D"]
        nd.scratch["d"] = -nd.scratch["v"]
    for r in range(1, N + 1):
        net.communicate(f"direction-{r}", lambda nd, send: _broadcast(nd, send, "v", nd.scratch["v"]))
        net.local(_series_step)
    d = net.gather("d")

    # share d_i with neighbors; the same messages open the flood of d_i g_i
    for nd in net.nodes:
        nd.scratch["p"] = nd.scratch["d"] * nd.scratch["g"]
        nd.scratch["_known"] = {nd.id: nd.scratch["p"]}
        nd.scratch["_fresh"] = ((nd.id, nd.scratch["p"]),)

    def send_d(nd, send):
        _broadcast(nd, send, "d+records", (nd.scratch["d"], nd.scratch["_fresh"]))

    def take_d(nd, inbox):
        nd.scratch["dw"] = nd.signs * (nd.scratch["d"] - _peer_values(nd, inbox, pick=0))
        if N >= 1:
            _merge_fresh(nd, inbox, pick=1)

    net.communicate("rhs", send_d)
    net.local(take_d)
    for _ in range(N - 1):
        net.communicate("rhs", _send_fresh)
        net.local(_merge_fresh)
    for nd in net.nodes:
        known = nd.scratch.pop("_known")
        nd.scratch.pop("_fresh")
        nd.scratch["rhs"] = sum(known[o] for o in sorted(known))
    rhs = net.gather("rhs")

    for nd in net.nodes:
        s = nd.scratch
        s["active"] = not (params.abstain_uncertified and s["rhs"] >= 0)
        s["alpha_i"] = 1.0
        s["trials"] = 0
        s["bt"] = 0
    alpha = 1.0
    for t in range(params.max_backtracks + 1):
        # phase barrier held by the engine: trials stop once no node is searching
        if not any(nd.scratch["active"] for nd in net.nodes):
            break
        net.local(_increment_step(alpha))
        net.flood(f"linesearch-{t}", "delta", "Q", N)
        for nd in net.nodes:
            s = nd.scratch
            if s["active"]:
                s["trials"] += 1
                if s["Q"] <= params.sigma * alpha * s["rhs"] + ARMIJO_SLACK:
                    s["alpha_i"], s["bt"], s["active"] = alpha, t, False
        alpha *= params.beta
    stuck = [nd.id for nd in net.nodes if nd.scratch["active"]]
    if stuck:
        raise LineSearchFailure(
            f"{len(stuck)} node(s) exceeded {params.max_backtracks} backtracks in the simulator",
            diagnostics={"nodes": stuck},
        )
    per_node = net.gather("alpha_i")
    log.trials = np.array([nd.scratch["trials"] for nd in net.nodes], dtype=int)

    log.consensus_stages, log.consensus_agree_stage = net.min_consensus("alpha_i", "amin", N)
    held = net.gather("amin")
    if not np.all(held == held[0]):
        raise ProtocolFault("min-consensus did not reach agreement")

    for nd in net.nodes:
        nd.lam = nd.lam + nd.scratch["amin"] * nd.scratch["d"]
    return net, log, StepReport(
        lam=lam, g=g, d=d, rhs_sums=rhs, per_node_alphas=per_node,
        per_node_backtracks=net.gather("bt").astype(int), alpha=float(held[0]),
        lam_next=disassemble(net),
    )


def _take_min(nd, inbox, key):
    m = nd.scratch[key]
    for msg in inbox:
        if msg.payload < m:
            m = msg.payload
    nd.scratch[key] = m


@dataclass(frozen=True)
class AuditReport:
    rounds_per_phase: dict
    messages_per_round: tuple
    direction_rounds: int
    consensus_stages: int
    consensus_agree_stage: int
    consensus_bound: int
    guard_trips: int
    direction_ok: bool
    consensus_ok: bool

    @property
    def ok(self):
        return self.direction_ok and self.consensus_ok and self.guard_trips == 0


def message_audit(log, N, diam, guard_trips=0):
    """Check the communication claims of one logged iteration."""
    per_phase = {}
    for e in log.entries:
        fam = _phase_family(e.phase)
        per_phase[fam] = per_phase.get(fam, 0) + 1
    direction = per_phase.get("direction", 0)
    bound = -(-diam // max(N, 1))
    ran_consensus = "consensus" in per_phase
    return AuditReport(
        rounds_per_phase=per_phase,
        messages_per_round=tuple(e.messages for e in log.entries),
        direction_rounds=direction,
        consensus_stages=log.consensus_stages,
        consensus_agree_stage=log.consensus_agree_stage,
        consensus_bound=bound,
        guard_trips=guard_trips,
        direction_ok=(direction == N) or not ran_consensus,
        consensus_ok=(not ran_consensus) or (log.consensus_stages <= bound and log.consensus_agree_stage <= bound),
    )
