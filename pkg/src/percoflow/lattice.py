"""Discretization of a continuous domain onto Z^d/n and the induced graph.

A mesh-n lattice vertex is stored as its unscaled integer vector z (the
embedded point is z/n).  All membership tests against the continuous domain
run in exact rational arithmetic, because the boundary-layer definitions mix
a strict and a weak inequality at distance exactly 1/n and floats would
misclassify ties.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, floor

import numpy as np

from .errors import EmptyDiscretization
from .geometry import Ball, Box, Cylinder, Domain


@dataclass(frozen=True)
class LatticeEdge:
    """Canonical lattice edge: lower endpoint z and axis k, joining z and z+e_k."""

    z: tuple
    axis: int
    n: int

    def endpoints(self):
        """Both endpoints as exact rational points (z/n, (z+e_k)/n)."""
        p = tuple(Fraction(c, self.n) for c in self.z)
        q = tuple(
            Fraction(c + (1 if k == self.axis else 0), self.n)
            for k, c in enumerate(self.z)
        )
        return p, q


@dataclass
class DiscreteDomain:
    """The four vertex sets (omega, gamma, gamma1, gamma2) at mesh n.

    vertices holds every omega-vertex as an int64 row, lexicographically
    sorted; the three boolean arrays mark the boundary layers.
    """

    n: int
    domain: Domain
    vertices: np.ndarray  # (N, d) int64
    gamma: np.ndarray  # (N,) bool
    gamma1: np.ndarray
    gamma2: np.ndarray
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            self._index = {tuple(int(c) for c in row): i for i, row in enumerate(self.vertices)}

    @property
    def d(self) -> int:
        return self.vertices.shape[1]

    def vertex_count(self) -> int:
        return len(self.vertices)

    def index_of(self, z) -> int:
        """Row index of vertex z, or -1 if z is not in omega_n."""
        return self._index.get(tuple(int(c) for c in z), -1)

    def point(self, i: int) -> np.ndarray:
        return self.vertices[i] / self.n

    def gamma_count(self) -> int:
        return int(self.gamma.sum())

    def gamma1_indices(self) -> np.ndarray:
        return np.flatnonzero(self.gamma1)

    def gamma2_indices(self) -> np.ndarray:
        return np.flatnonzero(self.gamma2)


def discretize(omega: Domain, n: int) -> DiscreteDomain:
    """Build (omega_n, gamma_n, gamma1_n, gamma2_n) at mesh n.

    omega_n collects the z with d_inf(z/n, omega) < 1/n; gamma_n the
    omega_n-vertices with a lattice neighbour outside; gamma^i_n the
    gamma_n-vertices within 1/n of the side-i boundary piece but at distance
    >= 1/n from the other one.  Everything is decided with Fractions.
    """
    if n < 1:
        raise ValueError(f"mesh must be >= 1, got {n}")
    lo, hi = omega.bounding_box()
    d = omega.d
    z_lo = [ceil(n * c) - 1 for c in lo]
    z_hi = [floor(n * c) + 1 for c in hi]
    inv_n = Fraction(1, n)

    verts = []
    for z in itertools.product(*(range(a, b + 1) for a, b in zip(z_lo, z_hi))):
        p = tuple(Fraction(c, n) for c in z)
        if omega.linf_distance(p) < inv_n:
            verts.append(z)
    if not verts:
        raise EmptyDiscretization(f"no lattice vertex within 1/{n} of the domain")
    verts.sort()
    vset = set(verts)

    source = omega.source_facets()
    sink = omega.sink_facets()

    def dist_to(facets, p):
        return min(f.linf_distance(p) for f in facets)

    gamma = np.zeros(len(verts), dtype=bool)
    gamma1 = np.zeros(len(verts), dtype=bool)
    gamma2 = np.zeros(len(verts), dtype=bool)
    for i, z in enumerate(verts):
        on_boundary = False
        for k in range(d):
            for s in (-1, 1):
                y = tuple(c + (s if j == k else 0) for j, c in enumerate(z))
                if y not in vset:
                    on_boundary = True
                    break
            if on_boundary:
                break
        if not on_boundary:
            continue
        gamma[i] = True
        p = tuple(Fraction(c, n) for c in z)
        d1 = dist_to(source, p)
        d2 = dist_to(sink, p)
        if d1 < inv_n and d2 >= inv_n:
            gamma1[i] = True
        elif d2 < inv_n and d1 >= inv_n:
            gamma2[i] = True

    return DiscreteDomain(
        n=n,
        domain=omega,
        vertices=np.array(verts, dtype=np.int64),
        gamma=gamma,
        gamma1=gamma1,
        gamma2=gamma2,
    )


@dataclass
class LatticeGraph:
    """Compact indexed graph over a vertex set of Z^d at one mesh.

    edge_z/edge_axis give the canonical form (lower endpoint, direction) of
    each edge; edge_u/edge_v are the row indices of its endpoints in
    vertices.  Edges are sorted by (z, axis), so two builds of the same set
    agree bit for bit.
    """

    n: int
    vertices: np.ndarray  # (N, d) int64, lex-sorted
    edge_z: np.ndarray  # (E, d) int64, lower endpoint
    edge_axis: np.ndarray  # (E,) int64
    edge_u: np.ndarray  # (E,) int64 index of z
    edge_v: np.ndarray  # (E,) int64 index of z + e_axis

    @property
    def d(self) -> int:
        return self.vertices.shape[1]

    def vertex_count(self) -> int:
        return len(self.vertices)

    def edge_count(self) -> int:
        return len(self.edge_axis)

    def edge(self, i: int) -> LatticeEdge:
        return LatticeEdge(tuple(int(c) for c in self.edge_z[i]), int(self.edge_axis[i]), self.n)

    def edge_midpoints(self) -> np.ndarray:
        """Float midpoints of all edges, scaled down by n.  Shape (E, d)."""
        mid = self.edge_z.astype(np.float64)
        mid[np.arange(len(mid)), self.edge_axis] += 0.5
        return mid / self.n


def induced_graph(D: DiscreteDomain) -> LatticeGraph:
    """All lattice edges with both endpoints in omega_n, canonically ordered."""
    d = D.d
    ez, ea, eu, ev = [], [], [], []
    for i, row in enumerate(D.vertices):
        z = tuple(int(c) for c in row)
        for k in range(d):
            y = tuple(c + (1 if j == k else 0) for j, c in enumerate(z))
            j = D.index_of(y)
            if j >= 0:
                ez.append(z)
                ea.append(k)
                eu.append(i)
                ev.append(j)
    return LatticeGraph(
        n=D.n,
        vertices=D.vertices,
        edge_z=np.array(ez, dtype=np.int64).reshape(len(ez), d),
        edge_axis=np.array(ea, dtype=np.int64),
        edge_u=np.array(eu, dtype=np.int64),
        edge_v=np.array(ev, dtype=np.int64),
    )


def _open_interval_cover(intervals, lo, hi) -> bool:
    """Does the union of open intervals cover the open interval (lo, hi)?"""
    live = sorted((a, b) for a, b in intervals if b > a and b > lo and a < hi)
    reach = lo
    for a, b in live:
        if a > reach:
            return False  # a gap (reach, a) is uncovered
        reach = max(reach, b)
        if reach >= hi:
            return True
    return reach >= hi


def edge_in_region(e: LatticeEdge, A) -> bool:
    """Is the open segment between the edge's embedded endpoints inside A?

    Convex A (closed cylinder or ball, open box): segment interior lies in A
    iff both endpoints are in the closure and the midpoint is in A itself.
    A union of open boxes is not convex, so there the covered parameter
    intervals are intersected exactly and checked to cover (0,1).
    """
    p, q = e.endpoints()
    if isinstance(A, Domain):
        intervals = []
        for box in A.boxes:
            t_lo, t_hi = Fraction(0), Fraction(1)
            ok = True
            for k in range(len(p)):
                dk = q[k] - p[k]
                if dk == 0:
                    if not (box.lo[k] < p[k] < box.hi[k]):
                        ok = False
                        break
                else:
                    # dk > 0 always for canonical edges
                    t_lo = max(t_lo, (box.lo[k] - p[k]) / dk)
                    t_hi = min(t_hi, (box.hi[k] - p[k]) / dk)
            if ok and t_hi > t_lo:
                intervals.append((t_lo, t_hi))
        return _open_interval_cover(intervals, Fraction(0), Fraction(1))
    if isinstance(A, Box):
        # open convex: endpoints in the closure, midpoint strictly inside
        mid = tuple((a + b) / 2 for a, b in zip(p, q))
        in_closure = all(
            box_lo <= x <= box_hi for x, box_lo, box_hi in zip(p, A.lo, A.hi)
        ) and all(box_lo <= x <= box_hi for x, box_lo, box_hi in zip(q, A.lo, A.hi))
        return in_closure and A.contains(mid)
    if isinstance(A, (Cylinder, Ball)):
        # closed convex at float tolerance
        pf = np.array([float(x) for x in p])
        qf = np.array([float(x) for x in q])
        return bool(A.contains(pf) and A.contains(qf))
    raise TypeError(f"unsupported region type {type(A).__name__}")


def dump_vertices(D: DiscreteDomain, path) -> None:
    """CSV of all vertices with their layer flags, for eyeballing a mesh."""
    d = D.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"z{k}" for k in range(d)] + ["omega", "gamma", "gamma1", "gamma2"])
        for i, row in enumerate(D.vertices):
            w.writerow(
                [int(c) for c in row]
                + [1, int(D.gamma[i]), int(D.gamma1[i]), int(D.gamma2[i])]
            )
