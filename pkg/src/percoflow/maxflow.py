"""Exact max-flow / min-cut on induced lattice graphs.

Terminal sets are wired to a virtual super-source and super-sink through
infinite arcs, and a Dinic solver runs on quantized integer capacities, so
the optimum is exact and the duality check (flow value == capacity of the
extracted cut) is an integer comparison, not a tolerance.

Each undirected lattice edge becomes two antiparallel arcs that each carry
the full capacity q(e); the net transport is then (use of one arc minus use
of the other)/2, which recovers the single orientation o(e) plus a
nonnegative amount g(e) <= q(e).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from numba import njit

from .capacities import CapacityField, check_budget, edge_keys
from .errors import EmptyTerminal, OverlappingTerminals
from .lattice import LatticeGraph


@njit(cache=True)
def _dinic(head, out_ptr, out_arcs, res, s, t):  # pragma: no cover - jitted
    V = out_ptr.shape[0] - 1
    level = np.empty(V, np.int32)
    it = np.empty(V, np.int64)
    q = np.empty(V, np.int64)
    path_v = np.empty(V + 1, np.int64)
    path_a = np.empty(V + 1, np.int64)
    total = np.int64(0)
    while True:
        # BFS level graph on positive residuals
        level[:] = -1
        level[s] = 0
        q[0] = s
        qh, qt = 0, 1
        while qh < qt:
            u = q[qh]
            qh += 1
            for k in range(out_ptr[u], out_ptr[u + 1]):
                a = out_arcs[k]
                if res[a] > 0:
                    w = head[a]
                    if level[w] < 0:
                        level[w] = level[u] + 1
                        q[qt] = w
                        qt += 1
        if level[t] < 0:
            break
        # blocking flow by iterative DFS with arc cursors
        for u in range(V):
            it[u] = out_ptr[u]
        v = s
        depth = 0
        path_v[0] = s
        while True:
            if v == t:
                f = res[path_a[0]]
                for i in range(1, depth):
                    if res[path_a[i]] < f:
                        f = res[path_a[i]]
                total += f
                for i in range(depth):
                    a = path_a[i]
                    res[a] -= f
                    res[a ^ 1] += f
                i = 0
                while i < depth and res[path_a[i]] > 0:
                    i += 1
                depth = i
                v = path_v[depth]
                continue
            advanced = False
            while it[v] < out_ptr[v + 1]:
                a = out_arcs[it[v]]
                w = head[a]
                if res[a] > 0 and level[w] == level[v] + 1:
                    path_a[depth] = a
                    depth += 1
                    path_v[depth] = w
                    v = w
                    advanced = True
                    break
                it[v] += 1
            if advanced:
                continue
            if v == s:
                break
            level[v] = -1
            depth -= 1
            v = path_v[depth]
            it[v] += 1
    return total


@njit(cache=True)
def _residual_reach(head, out_ptr, out_arcs, res, s):  # pragma: no cover
    V = out_ptr.shape[0] - 1
    seen = np.zeros(V, np.bool_)
    q = np.empty(V, np.int64)
    seen[s] = True
    q[0] = s
    qh, qt = 0, 1
    while qh < qt:
        u = q[qh]
        qh += 1
        for k in range(out_ptr[u], out_ptr[u + 1]):
            a = out_arcs[k]
            if res[a] > 0:
                w = head[a]
                if not seen[w]:
                    seen[w] = True
                    q[qt] = w
                    qt += 1
    return seen


@dataclass
class Stream:
    """A feasible flow assignment: amount g(e) >= 0 along orientation o(e).

    o is +1 when the fluid runs from the canonical lower endpoint towards
    the upper one, -1 the other way; edges with zero net transport keep +1.
    value is the claimed total flow in quantized units.
    """

    g: np.ndarray  # (E,) int64
    o: np.ndarray  # (E,) int8
    value: int


@dataclass
class Cutset:
    """A set of edges separating the terminals, with its exact capacity.

    edges holds indices into the instance's edge arrays; source_side flags
    the vertices on the F1 side, whose coboundary these edges are.
    """

    edges: np.ndarray  # (k,) int64 edge indices
    capacity: int
    source_side: np.ndarray  # (V,) bool

    def size(self) -> int:
        return len(self.edges)


@dataclass
class FlowResult:
    """Everything one solve produces: optimum, stream, cut, bookkeeping."""

    value: int
    Q: int
    stream: Stream
    cutset: Cutset
    meta: dict = dc_field(default_factory=dict)

    @property
    def real_value(self) -> float:
        return self.value / self.Q

    @property
    def source_side(self) -> np.ndarray:
        return self.cutset.source_side


class FlowSolver:
    """Reusable arc structure for one (graph, F1, F2) instance.

    Building the CSR arrays costs more than a solve, so batch drivers make
    one solver and feed it fresh capacity vectors replica after replica.
    """

    def __init__(self, n_vertices: int, edge_u, edge_v, F1, F2):
        F1 = np.asarray(F1, dtype=np.int64)
        F2 = np.asarray(F2, dtype=np.int64)
        if len(F1) == 0 or len(F2) == 0:
            raise EmptyTerminal("both terminal sets must be nonempty")
        if len(np.intersect1d(F1, F2)) > 0:
            raise OverlappingTerminals("terminal sets intersect")
        for F in (F1, F2):
            if len(F) and (F.min() < 0 or F.max() >= n_vertices):
                raise IndexError("terminal vertex index out of range")
        self.V = int(n_vertices)
        self.edge_u = np.asarray(edge_u, dtype=np.int64)
        self.edge_v = np.asarray(edge_v, dtype=np.int64)
        self.F1 = F1
        self.F2 = F2
        self.E = len(self.edge_u)
        self.S = self.V
        self.T = self.V + 1

        terminals = [(self.S, int(f)) for f in F1] + [(int(g), self.T) for g in F2]
        self.n_term = len(terminals)
        A = 2 * self.E + 2 * self.n_term
        tails = np.empty(A, dtype=np.int64)
        heads = np.empty(A, dtype=np.int64)
        tails[0 : 2 * self.E : 2] = self.edge_u
        heads[0 : 2 * self.E : 2] = self.edge_v
        tails[1 : 2 * self.E : 2] = self.edge_v
        heads[1 : 2 * self.E : 2] = self.edge_u
        for j, (a, b) in enumerate(terminals):
            tails[2 * self.E + 2 * j] = a
            heads[2 * self.E + 2 * j] = b
            tails[2 * self.E + 2 * j + 1] = b
            heads[2 * self.E + 2 * j + 1] = a
        counts = np.zeros(self.V + 3, dtype=np.int64)
        np.add.at(counts, tails + 1, 1)
        self.out_ptr = np.cumsum(counts)
        self.out_arcs = np.argsort(tails, kind="stable").astype(np.int64)
        self.heads = heads
        self._res = np.empty(A, dtype=np.int64)

    def solve_quantized(self, q: np.ndarray):
        """Run one exact solve; returns (value, residual array view).

        The residual array is reused between calls — consume it before the
        next solve.
        """
        q = np.asarray(q, dtype=np.int64)
        if len(q) != self.E:
            raise ValueError(f"expected {self.E} capacities, got {len(q)}")
        check_budget(q)
        res = self._res
        res[0 : 2 * self.E : 2] = q
        res[1 : 2 * self.E : 2] = q
        inf = int(q.sum(dtype=np.int64)) + 1
        res[2 * self.E :: 2] = inf
        res[2 * self.E + 1 :: 2] = 0
        value = int(_dinic(self.heads, self.out_ptr, self.out_arcs, res, self.S, self.T))
        return value, res

    def extract(self, value: int, res: np.ndarray, q: np.ndarray) -> FlowResult:
        """Package stream + source-side cut from a finished residual state."""
        E = self.E
        net = (res[1 : 2 * E : 2] - res[0 : 2 * E : 2]) // 2
        o = np.where(net >= 0, 1, -1).astype(np.int8)
        g = np.abs(net)
        seen = _residual_reach(self.heads, self.out_ptr, self.out_arcs, res, self.S)
        side = np.asarray(seen[: self.V])
        cut_edges = np.flatnonzero(side[self.edge_u] != side[self.edge_v])
        cap = int(np.asarray(q, dtype=np.int64)[cut_edges].sum(dtype=np.int64))
        # max-flow min-cut: the residual cut must price out at the optimum
        assert cap == value, f"duality broke: flow {value} vs cut {cap}"
        return FlowResult(
            value=value,
            Q=0,  # caller fills
            stream=Stream(g=g, o=o, value=value),
            cutset=Cutset(edges=cut_edges, capacity=cap, source_side=side),
        )


def max_flow(
    graph: LatticeGraph, F1, F2, field: CapacityField, replica: int = 0
) -> FlowResult:
    """phi(F1 -> F2) on the induced graph under the seeded capacity field."""
    solver = FlowSolver(graph.vertex_count(), graph.edge_u, graph.edge_v, F1, F2)
    q = field.quantized(edge_keys(graph.edge_z, graph.edge_axis), replica)
    value, res = solver.solve_quantized(q)
    out = solver.extract(value, res, q)
    out.Q = field.Q
    out.meta = {"n": graph.n, "seed": field.seed, "replica": replica,
                "law": field.law.label()}
    return out


def verify_stream(
    stream: Stream, graph: LatticeGraph, F1, F2,
    field: CapacityField = None, replica: int = 0, q: np.ndarray = None,
) -> bool:
    """Independent audit of a stream: capacity, conservation, accounting.

    Re-derives the capacities, checks 0 <= g(e) <= t(e) and exact balance at
    every non-terminal vertex, then recomputes the flow as the net amount
    entering the sink set and compares with the claimed value.  Shares no
    code with the solver on purpose.
    """
    if q is None:
        if field is None:
            raise ValueError("need either a field or an explicit q array")
        q = field.quantized(edge_keys(graph.edge_z, graph.edge_axis), replica)
    g = np.asarray(stream.g, dtype=np.int64)
    if len(g) != graph.edge_count():
        return False
    if (g < 0).any() or (g > q).any():
        return False
    signed = g * stream.o.astype(np.int64)
    balance = np.zeros(graph.vertex_count(), dtype=np.int64)
    np.add.at(balance, graph.edge_v, signed)
    np.add.at(balance, graph.edge_u, -signed)
    interior = np.ones(graph.vertex_count(), dtype=bool)
    interior[np.asarray(F1, dtype=np.int64)] = False
    interior[np.asarray(F2, dtype=np.int64)] = False
    if balance[interior].any():
        return False
    inflow = int(balance[np.asarray(F2, dtype=np.int64)].sum(dtype=np.int64))
    return inflow == int(stream.value)


def is_cut(edges, F1, F2, graph: LatticeGraph) -> bool:
    """Does removing these edges disconnect F1 from F2?  Plain BFS verdict."""
    drop = np.zeros(graph.edge_count(), dtype=bool)
    drop[np.asarray(edges, dtype=np.int64)] = True
    keep = ~drop
    V = graph.vertex_count()
    adj_u = graph.edge_u[keep]
    adj_v = graph.edge_v[keep]
    nbr = [[] for _ in range(V)]
    for a, b in zip(adj_u.tolist(), adj_v.tolist()):
        nbr[a].append(b)
        nbr[b].append(a)
    target = np.zeros(V, dtype=bool)
    target[np.asarray(F2, dtype=np.int64)] = True
    seen = np.zeros(V, dtype=bool)
    stack = [int(f) for f in np.asarray(F1, dtype=np.int64)]
    for f in stack:
        seen[f] = True
    while stack:
        u = stack.pop()
        if target[u]:
            return False
        for w in nbr[u]:
            if not seen[w]:
                seen[w] = True
                stack.append(w)
    return not bool(target[seen].any())


def cut_capacity(edges, field: CapacityField, replica: int = 0) -> int:
    """Exact quantized capacity of a set of canonical edges."""
    edges = list(edges)
    if not edges:
        return 0
    z = np.array([e.z for e in edges], dtype=np.int64)
    ax = np.array([e.axis for e in edges], dtype=np.int64)
    q = field.quantized(edge_keys(z, ax), replica)
    return int(q.sum(dtype=np.int64))
