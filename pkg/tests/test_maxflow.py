"""Exact max-flow solver vs brute force, scipy, and hand-built instances."""

from __future__ import annotations

import numpy as np
import pytest

from percoflow.capacities import (
    CapacityField,
    bernoulli,
    constant,
    edge_keys,
    uniform_int,
)
from percoflow.errors import CapacityOverflow, EmptyTerminal, OverlappingTerminals
from percoflow.geometry import unit_square_domain
from percoflow.lattice import LatticeEdge, discretize, induced_graph
from percoflow.maxflow import (
    FlowSolver,
    cut_capacity,
    is_cut,
    max_flow,
    verify_stream,
)


def _brute_min_cut(num_v, edge_u, edge_v, caps, sources, sinks):
    """Minimum cut by enumerating every source-side bipartition.

    Independent of the solver: no residual graphs, just 2^k subsets.
    """
    sources = set(int(s) for s in sources)
    sinks = set(int(t) for t in sinks)
    free = [v for v in range(num_v) if v not in sources and v not in sinks]
    k = len(free)
    subs = np.arange(1 << k, dtype=np.uint32)
    side = np.zeros((num_v, len(subs)), dtype=bool)
    for s in sources:
        side[s] = True
    for i, v in enumerate(free):
        side[v] = ((subs >> i) & 1).astype(bool)
    cut = np.zeros(len(subs), dtype=np.int64)
    for u, v, c in zip(edge_u, edge_v, caps):
        cut += np.int64(c) * (side[u] ^ side[v])
    return int(cut.min())


def _random_instance(rng, max_edges=12):
    """Small connected-ish random graph with two designated terminal sets."""
    num_v = int(rng.integers(4, 10))
    m = int(rng.integers(3, max_edges + 1))
    m = min(m, num_v * (num_v - 1) // 2)  # simple graph: can't ask for more
    pairs = set()
    while len(pairs) < m:
        u, v = rng.integers(0, num_v, size=2)
        if u != v:
            pairs.add((min(int(u), int(v)), max(int(u), int(v))))
    edge_u = np.array([p[0] for p in pairs], dtype=np.int64)
    edge_v = np.array([p[1] for p in pairs], dtype=np.int64)
    caps = rng.integers(0, 6, size=len(pairs)).astype(np.int64)
    verts = list(range(num_v))
    rng.shuffle(verts)
    n_src = int(rng.integers(1, 3))
    n_snk = int(rng.integers(1, 3))
    F1 = verts[:n_src]
    F2 = verts[n_src : n_src + n_snk]
    return num_v, edge_u, edge_v, caps, F1, F2


def test_duality_on_150_random_instances():
    rng = np.random.default_rng(10)
    for trial in range(150):
        num_v, eu, ev, caps, F1, F2 = _random_instance(rng)
        solver = FlowSolver(num_v, eu, ev, F1, F2)
        value, res = solver.solve_quantized(caps)
        expected = _brute_min_cut(num_v, eu, ev, caps, F1, F2)
        assert value == expected, f"trial={trial}"
        out = solver.extract(value, res, caps)
        assert out.cutset.capacity == value
        assert is_cut_generic(out.cutset.edges, eu, ev, F1, F2, num_v)


def is_cut_generic(cut_edges, eu, ev, F1, F2, num_v):
    """BFS on the complement of the cut, for arbitrary (non-lattice) graphs."""
    keep = np.ones(len(eu), dtype=bool)
    keep[np.asarray(cut_edges, dtype=np.int64)] = False
    nbr = [[] for _ in range(num_v)]
    for u, v in zip(eu[keep], ev[keep]):
        nbr[int(u)].append(int(v))
        nbr[int(v)].append(int(u))
    seen = set(int(f) for f in F1)
    stack = list(seen)
    while stack:
        u = stack.pop()
        for w in nbr[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return not seen.intersection(int(t) for t in F2)


def test_agrees_with_scipy_on_int32_instances():
    """Dual route: scipy's push-relabel on a super-source/sink digraph."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import maximum_flow

    rng = np.random.default_rng(11)
    for _ in range(100):
        num_v, eu, ev, caps, F1, F2 = _random_instance(rng, max_edges=20)
        solver = FlowSolver(num_v, eu, ev, F1, F2)
        value, _ = solver.solve_quantized(caps)

        big = int(caps.sum()) + 1
        s, t = num_v, num_v + 1
        rows, cols, data = [], [], []
        for u, v, c in zip(eu, ev, caps):
            if c > 0:
                rows += [int(u), int(v)]
                cols += [int(v), int(u)]
                data += [int(c), int(c)]
        for f in F1:
            rows.append(s)
            cols.append(int(f))
            data.append(big)
        for f in F2:
            rows.append(int(f))
            cols.append(t)
            data.append(big)
        M = csr_matrix(
            (data, (rows, cols)), shape=(num_v + 2, num_v + 2), dtype=np.int32
        )
        assert maximum_flow(M, s, t).flow_value == value


def test_two_vertex_path():
    # s - a - t with capacities 3 then 2: bottleneck 2
    eu = np.array([0, 1], dtype=np.int64)
    ev = np.array([1, 2], dtype=np.int64)
    caps = np.array([3, 2], dtype=np.int64)
    solver = FlowSolver(3, eu, ev, [0], [2])
    value, res = solver.solve_quantized(caps)
    assert value == 2
    out = solver.extract(value, res, caps)
    assert list(out.cutset.edges) == [1]
    assert out.stream.g.tolist() == [2, 2]


def test_two_disjoint_paths_add_up():
    # 0-1-4 and 0-2-4 each of unit capacity, plus a fat dead end 0-3
    eu = np.array([0, 1, 0, 2, 0], dtype=np.int64)
    ev = np.array([1, 4, 2, 4, 3], dtype=np.int64)
    caps = np.array([1, 1, 1, 1, 9], dtype=np.int64)
    solver = FlowSolver(5, eu, ev, [0], [4])
    value, _ = solver.solve_quantized(caps)
    assert value == 2


def test_disconnected_terminals_give_zero():
    eu = np.array([0, 2], dtype=np.int64)
    ev = np.array([1, 3], dtype=np.int64)
    caps = np.array([5, 5], dtype=np.int64)
    solver = FlowSolver(4, eu, ev, [0], [3])
    value, res = solver.solve_quantized(caps)
    assert value == 0
    out = solver.extract(value, res, caps)
    assert out.cutset.size() == 0 or out.cutset.capacity == 0


def test_raising_a_capacity_never_lowers_the_flow():
    rng = np.random.default_rng(12)
    for _ in range(100):
        num_v, eu, ev, caps, F1, F2 = _random_instance(rng)
        solver = FlowSolver(num_v, eu, ev, F1, F2)
        base, _ = solver.solve_quantized(caps)
        j = int(rng.integers(0, len(caps)))
        bumped = caps.copy()
        bumped[j] += int(rng.integers(1, 5))
        higher, _ = solver.solve_quantized(bumped)
        assert higher >= base


def test_flow_is_symmetric_in_the_terminals():
    rng = np.random.default_rng(13)
    for _ in range(100):
        num_v, eu, ev, caps, F1, F2 = _random_instance(rng)
        fwd, _ = FlowSolver(num_v, eu, ev, F1, F2).solve_quantized(caps)
        rev, _ = FlowSolver(num_v, eu, ev, F2, F1).solve_quantized(caps)
        assert fwd == rev


def test_big_capacities_stay_exact():
    """int64 range: a path of near-2^55 capacities solves to the exact
    bottleneck with no silent truncation."""
    eu = np.array([0, 1, 2], dtype=np.int64)
    ev = np.array([1, 2, 3], dtype=np.int64)
    caps = np.array([2**55 + 3, 2**55 + 1, 2**55 + 2], dtype=np.int64)
    solver = FlowSolver(4, eu, ev, [0], [3])
    value, _ = solver.solve_quantized(caps)
    assert value == 2**55 + 1


def test_terminal_validation():
    eu = np.array([0], dtype=np.int64)
    ev = np.array([1], dtype=np.int64)
    with pytest.raises(EmptyTerminal):
        FlowSolver(2, eu, ev, [], [1])
    with pytest.raises(OverlappingTerminals):
        FlowSolver(2, eu, ev, [0], [0, 1])


# ------------------------------------------------------- lattice plumbing


def _square_setup(n, law, seed=0):
    D = discretize(unit_square_domain(), n)
    G = induced_graph(D)
    return G, D.gamma1_indices(), D.gamma2_indices(), CapacityField(law=law, seed=seed)


def test_constant_law_flow_equals_row_count():
    for n in (2, 4, 8):
        G, F1, F2, field = _square_setup(n, constant(1))
        out = max_flow(G, F1, F2, field)
        assert out.real_value == pytest.approx(n + 1)
        assert out.cutset.size() == n + 1


def test_verify_stream_accepts_the_solver_output():
    for n in (3, 5):
        for law in (bernoulli(0.6, 1), uniform_int(0, 3)):
            G, F1, F2, field = _square_setup(n, law, seed=21)
            out = max_flow(G, F1, F2, field)
            assert verify_stream(out.stream, G, F1, F2, field=field)


def test_verify_stream_rejects_tampering():
    G, F1, F2, field = _square_setup(4, uniform_int(1, 3), seed=2)
    q = field.quantized(edge_keys(G.edge_z, G.edge_axis))
    out = max_flow(G, F1, F2, field)

    over = out.stream
    g = over.g.copy()
    g[0] = q[0] + 1  # capacity violation
    assert not verify_stream(type(over)(g=g, o=over.o, value=over.value), G, F1, F2, q=q)

    g = over.g.copy()
    interior_edge = int(np.flatnonzero(over.g > 0)[-1])
    g[interior_edge] += 1  # breaks conservation somewhere
    assert not verify_stream(type(over)(g=g, o=over.o, value=over.value), G, F1, F2, q=q)

    # inflated claim
    assert not verify_stream(
        type(over)(g=over.g, o=over.o, value=over.value + 1), G, F1, F2, q=q
    )


def test_is_cut_and_cut_capacity_on_the_square():
    G, F1, F2, field = _square_setup(4, constant(1))
    out = max_flow(G, F1, F2, field)
    assert is_cut(out.cutset.edges, F1, F2, G)
    assert not is_cut([], F1, F2, G)
    assert is_cut(np.arange(G.edge_count()), F1, F2, G)
    # capacity of 5 unit edges is 5 in real units
    edges = [LatticeEdge(z=(2, j), axis=0, n=4) for j in range(5)]
    assert cut_capacity(edges, field) == 5 * field.Q
    assert cut_capacity([], field) == 0


def test_budget_overflow_guard_on_solve():
    eu = np.array([0], dtype=np.int64)
    ev = np.array([1], dtype=np.int64)
    solver = FlowSolver(2, eu, ev, [0], [1])
    with pytest.raises(CapacityOverflow):
        solver.solve_quantized(np.array([2**62], dtype=np.int64))
