"""Side-to-side and top-to-bottom flows through oriented cylinders.

A cylinder cyl(A,h) around a flat base A with unit normal v carries two
flow variables at mesh n: tau routes between the two boundary components
that hug the lateral sides of the base plane (A1h on the positive side of
A, A2h on the negative side), while phi routes from the bottom layer B
(vertices with an exiting edge through the face A - h v) to the top layer T
(same through A + h v).

Geometry runs in floats with a 1e-12 tolerance, since tilted normals are
irrational; tie-prone predicates fall back to testing the segment midpoint.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from math import ceil, floor

import numpy as np

from .capacities import CapacityField, edge_keys
from .errors import EmptyInstance
from .geometry import FLOAT_TOL, Cylinder, Hyperrectangle, cyl
from .lattice import LatticeGraph
from .maxflow import FlowResult, FlowSolver


@dataclass
class CylinderInstance:
    """All lattice data of one cylinder at one mesh.

    graph holds cyl intersect Z^d_n with the edges staying inside the closed
    cylinder; the four index arrays select the terminal layers.
    """

    cylinder: Cylinder
    n: int
    graph: LatticeGraph
    a1h: np.ndarray  # positive-side component, outside lattice neighbour
    a2h: np.ndarray  # negative-side component, outside lattice neighbour
    top: np.ndarray  # T: exiting edge meets the closed face A + h v
    bottom: np.ndarray  # B: exiting edge meets the closed face A - h v


def _segment_meets_face(p, q, face: Hyperrectangle, tol: float = FLOAT_TOL) -> bool:
    """Closed intersection test between segment [p,q] and a flat face."""
    rel_p = p - face.center
    rel_q = q - face.center
    sp = float(rel_p @ face.normal)
    sq = float(rel_q @ face.normal)

    def within_extents(x_rel):
        return all(
            abs(float(x_rel @ u)) <= s / 2 + tol
            for u, s in zip(face.frame, face.side_lengths)
        )

    if abs(sp) <= tol and abs(sq) <= tol:
        # segment grazes along the face plane: classify by its midpoint
        return within_extents((rel_p + rel_q) / 2)
    if (sp > tol and sq > tol) or (sp < -tol and sq < -tol):
        return False
    denom = sp - sq
    if abs(denom) <= tol:
        return within_extents((rel_p + rel_q) / 2)
    t = sp / denom
    t = min(1.0, max(0.0, t))
    x_rel = rel_p + t * (rel_q - rel_p)
    return within_extents(x_rel)


def build_cylinder_instance(
    A: Hyperrectangle, h: float, v=None, n: int = 1
) -> CylinderInstance:
    """Enumerate vertices, interior edges, and the four boundary layers.

    v defaults to the base's own normal; passing it separately just asserts
    the caller and the base agree on orientation.
    """
    if v is not None:
        v = np.asarray(v, dtype=float)
        if np.linalg.norm(v - A.normal) > 1e-9:
            raise ValueError("direction v disagrees with the base normal")
    C = cyl(A, h)
    d = C.d
    lo, hi = C.bounding_box()
    ranges = [
        np.arange(floor(n * lo[k]) - 1, ceil(n * hi[k]) + 2, dtype=np.int64)
        for k in range(d)
    ]
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, d)
    inside = C.contains_many(grid / n)
    verts = grid[inside]
    if len(verts) == 0:
        raise EmptyInstance("cylinder contains no lattice vertex")
    index = {tuple(int(c) for c in row): i for i, row in enumerate(verts)}

    ez, ea, eu, ev_ = [], [], [], []
    has_outside = np.zeros(len(verts), dtype=bool)
    exit_dirs: list[list[tuple]] = [[] for _ in range(len(verts))]
    for i, row in enumerate(verts):
        z = tuple(int(c) for c in row)
        for k in range(d):
            up = tuple(c + (1 if j == k else 0) for j, c in enumerate(z))
            j = index.get(up, -1)
            if j >= 0:
                ez.append(z)
                ea.append(k)
                eu.append(i)
                ev_.append(j)
            else:
                has_outside[i] = True
                exit_dirs[i].append(up)
            down = tuple(c - (1 if j == k else 0) for j, c in enumerate(z))
            if down not in index:
                has_outside[i] = True
                exit_dirs[i].append(down)
    if not ez:
        raise EmptyInstance("cylinder contains no lattice edge")

    graph = LatticeGraph(
        n=n,
        vertices=verts,
        edge_z=np.array(ez, dtype=np.int64),
        edge_axis=np.array(ea, dtype=np.int64),
        edge_u=np.array(eu, dtype=np.int64),
        edge_v=np.array(ev_, dtype=np.int64),
    )

    side = C.side_of_base_many(verts / n)
    a1h = np.flatnonzero(has_outside & (side == 1))
    a2h = np.flatnonzero(has_outside & (side == -1))

    top_face = Hyperrectangle(
        A.center + h * A.normal, A.normal, A.side_lengths, A.frame
    )
    bot_face = Hyperrectangle(
        A.center - h * A.normal, A.normal, A.side_lengths, A.frame
    )
    top, bottom = [], []
    for i in np.flatnonzero(has_outside):
        p = verts[i] / n
        hit_t = hit_b = False
        for y in exit_dirs[i]:
            qpt = np.asarray(y, dtype=float) / n
            if not hit_t and _segment_meets_face(p, qpt, top_face):
                hit_t = True
            if not hit_b and _segment_meets_face(p, qpt, bot_face):
                hit_b = True
        if hit_t:
            top.append(i)
        if hit_b:
            bottom.append(i)

    return CylinderInstance(
        cylinder=C,
        n=n,
        graph=graph,
        a1h=a1h,
        a2h=a2h,
        top=np.array(top, dtype=np.int64),
        bottom=np.array(bottom, dtype=np.int64),
    )


def instance_solver(inst: CylinderInstance, kind: str) -> FlowSolver:
    """Reusable solver for 'tau' (A1h -> A2h) or 'phi' (B -> T)."""
    g = inst.graph
    if kind == "tau":
        F1, F2 = inst.a1h, inst.a2h
    elif kind == "phi":
        F1, F2 = inst.bottom, inst.top
    else:
        raise ValueError(f"kind must be 'tau' or 'phi', not {kind!r}")
    return FlowSolver(g.vertex_count(), g.edge_u, g.edge_v, F1, F2)


def instance_keys(inst: CylinderInstance) -> np.ndarray:
    return edge_keys(inst.graph.edge_z, inst.graph.edge_axis)


def solve_instance(
    inst: CylinderInstance, field: CapacityField, kind: str, replica: int = 0
) -> FlowResult:
    """One flow solve on a prebuilt instance, with timing in the metadata."""
    t0 = time.perf_counter()
    solver = instance_solver(inst, kind)
    q = field.quantized(instance_keys(inst), replica)
    value, res = solver.solve_quantized(q)
    out = solver.extract(value, res, q)
    out.Q = field.Q
    A = inst.cylinder.base
    out.meta = {
        "direction": tuple(float(c) for c in A.normal),
        "area": A.area(),
        "h": inst.cylinder.h,
        "n": inst.n,
        "seed": field.seed,
        "replica": replica,
        "kind": kind,
        "millis": (time.perf_counter() - t0) * 1e3,
    }
    return out


def tau(A: Hyperrectangle, h: float, v, n: int, field: CapacityField,
        replica: int = 0) -> FlowResult:
    """Side-to-side cylinder flow pinned at the base boundary."""
    inst = build_cylinder_instance(A, h, v, n)
    return solve_instance(inst, field, "tau", replica)


def phi_cyl(A: Hyperrectangle, h: float, v, n: int, field: CapacityField,
            replica: int = 0) -> FlowResult:
    """Top-to-bottom cylinder flow (no pinning at the base boundary)."""
    inst = build_cylinder_instance(A, h, v, n)
    return solve_instance(inst, field, "phi", replica)


def csv_row(result: FlowResult) -> dict:
    """Flatten one solve into the per-solve log schema."""
    m = result.meta
    return {
        "direction": ";".join(repr(c) for c in m["direction"]),
        "area": repr(m["area"]),
        "h": repr(m["h"]),
        "n": m["n"],
        "seed": m["seed"],
        "replica": m.get("replica", 0),
        "tau_or_phi": m["kind"],
        "value": result.real_value,
        "value_q": result.value,
        "cut_size": result.cutset.size(),
        "millis": round(m["millis"], 3),
    }
