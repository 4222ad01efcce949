"""Monte Carlo estimation of the directional flow constant nu(v).

nu(v) is the large-n limit of E[tau_n(A,h)] / (n^(d-1) * area(A)) for a
cylinder with base A normal to v.  The estimator reports per-mesh means of
that ratio and takes the largest-mesh mean as the point estimate — no
extrapolation model, just the raw trend alongside it.

A table of estimates over a fixed direction grid supports the homogeneous
extension nu0, interpolated lookups at arbitrary directions, and the
structural checks (triangle-type inequality, convexity, degeneracy)."""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field as dc_field
from math import cos, pi, radians, sin, sqrt

import numpy as np

from .capacities import CapacityField, CapacityLaw, derive_seed
from .cylinder_flows import build_cylinder_instance, instance_keys, instance_solver
from .errors import DegenerateTriangle, InsufficientReplicas, MissingDirection
from .geometry import Hyperrectangle
from .stats import mean_stderr, slope_vs, wilson_interval


def direction_grid(d: int):
    """Fixed unit-direction grids: 36 spokes for d=2, the 26 cube-symmetry
    directions (faces, edges, corners) for d=3."""
    if d == 2:
        return [
            (cos(radians(10 * k)), sin(radians(10 * k))) for k in range(36)
        ]
    if d == 3:
        dirs = []
        for sx in (-1, 0, 1):
            for sy in (-1, 0, 1):
                for sz in (-1, 0, 1):
                    if sx == sy == sz == 0:
                        continue
                    norm = sqrt(sx * sx + sy * sy + sz * sz)
                    dirs.append((sx / norm, sy / norm, sz / norm))
        return dirs
    raise ValueError(f"no direction grid for d={d}")


def default_base(v) -> Hyperrectangle:
    """Unit-side hyperrectangle through the origin with normal v."""
    v = np.asarray(v, dtype=float)
    return Hyperrectangle(
        center=np.zeros(len(v)), normal=v, side_lengths=np.ones(len(v) - 1)
    )


def _unitize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("direction must be a nonzero vector")
    return v / norm


def _direction_words(v):
    """IEEE-754 bit patterns of the components, for seed derivation."""
    return [
        int.from_bytes(struct.pack(">d", float(c)), "big")
        for c in np.asarray(v, dtype=float)
    ]


@dataclass
class NuEstimate:
    """Estimate of nu(v) for one direction, with its finite-size profile."""

    v: tuple
    meshes: tuple
    replicas: int
    means: tuple  # per-mesh mean of tau_n / (n^(d-1) area)
    stderrs: tuple
    nu_hat: float  # largest-mesh mean
    stderr: float
    trend_slope: float  # slope of mean against 1/n
    A_sides: tuple
    h: float
    law: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "v": list(self.v),
            "nu_hat": self.nu_hat,
            "stderr": self.stderr,
            "meshes": list(self.meshes),
            "replicas": self.replicas,
            "means": list(self.means),
            "stderrs": list(self.stderrs),
            "trend_slope": self.trend_slope,
            "A": list(self.A_sides),
            "h": self.h,
            "law": self.law,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(dd: dict) -> "NuEstimate":
        return NuEstimate(
            v=tuple(dd["v"]),
            meshes=tuple(dd["meshes"]),
            replicas=dd["replicas"],
            means=tuple(dd["means"]),
            stderrs=tuple(dd["stderrs"]),
            nu_hat=dd["nu_hat"],
            stderr=dd["stderr"],
            trend_slope=dd["trend_slope"],
            A_sides=tuple(dd["A"]),
            h=dd["h"],
            law=dd["law"],
            seed=dd["seed"],
        )


def estimate_nu(
    v,
    law: CapacityLaw,
    meshes,
    replicas: int,
    A: Hyperrectangle = None,
    h: float = 0.5,
    seed: int = 0,
) -> NuEstimate:
    """Per-mesh means of tau_n/(n^(d-1) area(A)); largest mesh wins.

    Sub-seeds are derived from (seed, direction bits, mesh), so adding a
    direction or a mesh never perturbs the draws of another."""
    meshes = tuple(int(n) for n in meshes)
    if any(b <= a for a, b in zip(meshes, meshes[1:])):
        raise ValueError(f"meshes must be strictly increasing: {meshes}")
    if replicas < 30:
        warnings.warn(
            f"only {replicas} replicas; below 30 the stderr is unreliable",
            InsufficientReplicas,
            stacklevel=2,
        )
    v = _unitize(v)
    if A is None:
        A = default_base(v)
    d = len(v)
    area = A.area()
    words = _direction_words(v)

    means, ses = [], []
    for n in meshes:
        inst = build_cylinder_instance(A, h, None, n)
        solver = instance_solver(inst, "tau")
        keys = instance_keys(inst)
        fld = CapacityField(law, derive_seed(seed, "tau", *words, n))
        scale = n ** (d - 1) * area
        samples = np.empty(replicas)
        for rep in range(replicas):
            q = fld.quantized(keys, rep)
            value, _ = solver.solve_quantized(q)
            samples[rep] = value / fld.Q / scale
        m, se = mean_stderr(samples)
        means.append(m)
        ses.append(se)

    slope = slope_vs([1.0 / n for n in meshes], means)
    return NuEstimate(
        v=tuple(float(c) for c in v),
        meshes=meshes,
        replicas=replicas,
        means=tuple(means),
        stderrs=tuple(ses),
        nu_hat=means[-1],
        stderr=ses[-1],
        trend_slope=slope,
        A_sides=tuple(float(s) for s in A.side_lengths),
        h=float(h),
        law=law.label(),
        seed=seed,
    )


@dataclass
class NuTable:
    """nu estimates over a direction grid, with interpolated lookups."""

    entries: dict = dc_field(default_factory=dict)  # direction tuple -> NuEstimate

    def add(self, est: NuEstimate) -> None:
        self.entries[est.v] = est

    @property
    def nu_min(self) -> float:
        return min(e.nu_hat for e in self.entries.values())

    @property
    def nu_max(self) -> float:
        return max(e.nu_hat for e in self.entries.values())

    def directions(self) -> np.ndarray:
        return np.array(list(self.entries.keys()), dtype=np.float64)

    def lookup(self, v) -> tuple[float, float]:
        """(nu, stderr) at any unit direction.

        Within 2 degrees of a grid direction the grid value is returned
        as-is; otherwise the 2 (d=2) or 3 (d=3) nearest grid directions are
        blended with inverse-angle weights, which for a bracketed planar
        query is exactly linear interpolation in angle."""
        if not self.entries:
            raise MissingDirection("empty table")
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0:
            raise MissingDirection("zero direction")
        v = v / nv
        dirs = self.directions()
        ests = list(self.entries.values())
        ang = np.arccos(np.clip(dirs @ v, -1.0, 1.0))
        order = np.argsort(ang)
        nearest = order[0]
        if ang[nearest] > pi / 4:
            raise MissingDirection(
                f"nearest grid direction is {np.degrees(ang[nearest]):.1f} degrees away"
            )
        if ang[nearest] <= radians(2.0):
            e = ests[nearest]
            return e.nu_hat, e.stderr
        m = 2 if dirs.shape[1] == 2 else 3
        picks = order[:m]
        w = 1.0 / np.maximum(ang[picks], 1e-12)
        w = w / w.sum()
        val = float(sum(wi * ests[i].nu_hat for wi, i in zip(w, picks)))
        se = float(sqrt(sum((wi * ests[i].stderr) ** 2 for wi, i in zip(w, picks))))
        return val, se

    def to_list(self) -> list:
        return [e.to_dict() for e in self.entries.values()]

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_list(), fh, indent=1)
            fh.write("\n")

    @staticmethod
    def load(path) -> "NuTable":
        with open(path) as fh:
            data = json.load(fh)
        t = NuTable()
        for dd in data:
            t.add(NuEstimate.from_dict(dd))
        return t


def build_nu_table(
    law: CapacityLaw,
    d: int,
    meshes,
    replicas: int,
    directions=None,
    h: float = 0.5,
    seed: int = 0,
) -> NuTable:
    """estimate_nu over a whole direction grid."""
    table = NuTable()
    for v in directions if directions is not None else direction_grid(d):
        table.add(estimate_nu(v, law, meshes, replicas, h=h, seed=seed))
    return table


def nu0(w, table: NuTable) -> float:
    """Homogeneous extension: nu0(0) = 0, nu0(w) = |w| nu(w/|w|)."""
    w = np.asarray(w, dtype=float)
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        return 0.0
    val, _ = table.lookup(w / norm)
    return norm * val


def check_weak_triangle(table: NuTable, a, b, c) -> dict:
    """Verdict on |AB| nu(v_C) <= |AC| nu(v_B) + |BC| nu(v_A) + margin.

    v_X is the in-plane unit normal of the side opposite vertex X.  The
    margin is 3 combined standard errors of the two sides of the
    inequality; a violation is only flagged beyond it."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    ab, ac, bc = b - a, c - a, c - b
    lab, lac, lbc = (float(np.linalg.norm(x)) for x in (ab, ac, bc))
    if min(lab, lac, lbc) < 1e-12:
        raise DegenerateTriangle("two vertices coincide")
    if len(a) == 2:
        area2 = abs(ab[0] * ac[1] - ab[1] * ac[0])
        plane = None
    else:
        cr = np.cross(ab, ac)
        area2 = float(np.linalg.norm(cr))
        plane = cr / area2 if area2 > 0 else None
    if area2 < 1e-12 * max(lab, lac, lbc) ** 2:
        raise DegenerateTriangle("vertices are collinear")

    def side_normal(side):
        if plane is None:
            nrm = np.array([-side[1], side[0]])
        else:
            nrm = np.cross(side, plane)
        return nrm / np.linalg.norm(nrm)

    v_c = side_normal(ab)  # normal of the side opposite C
    v_b = side_normal(ac)
    v_a = side_normal(bc)
    nu_c, se_c = table.lookup(v_c)
    nu_b, se_b = table.lookup(v_b)
    nu_a, se_a = table.lookup(v_a)
    lhs = lab * nu_c
    rhs = lac * nu_b + lbc * nu_a
    combined = sqrt((lab * se_c) ** 2 + (lac * se_b) ** 2 + (lbc * se_a) ** 2)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "margin": 3 * combined,
        "violation": lhs > rhs + 3 * combined,
        "sides": {"AB": lab, "AC": lac, "BC": lbc},
        "normals": {
            "v_C": tuple(v_c),
            "v_B": tuple(v_b),
            "v_A": tuple(v_a),
        },
    }


def tau_lower_tail(
    v,
    A,
    h: float,
    law: CapacityLaw,
    meshes,
    replicas: int,
    eps: float,
    nu_hat: float,
    seed: int = 0,
) -> dict:
    """Empirical lower-tail P[tau_n <= (nu_hat - eps) n^(d-1) area] per mesh.

    Reports Wilson intervals and the decay-rate reading
    -log(p_hat) / (n^(d-1) area); meshes with zero hits carry rate None
    (the tail is too rare to see) rather than failing."""
    if not 0 < eps < nu_hat:
        raise ValueError(f"need 0 < eps < nu_hat, got eps={eps}, nu_hat={nu_hat}")
    v = _unitize(v)
    if A is None:
        A = default_base(v)
    d = len(v)
    area = A.area()
    words = _direction_words(v)
    rows = []
    for n in meshes:
        inst = build_cylinder_instance(A, h, None, int(n))
        solver = instance_solver(inst, "tau")
        keys = instance_keys(inst)
        fld = CapacityField(law, derive_seed(seed, "tau-tail", *words, int(n)))
        scale = n ** (d - 1) * area
        threshold = (nu_hat - eps) * scale
        hits = 0
        for rep in range(replicas):
            q = fld.quantized(keys, rep)
            value, _ = solver.solve_quantized(q)
            if value / fld.Q <= threshold:
                hits += 1
        p_hat = hits / replicas
        lo, hi = wilson_interval(hits, replicas)
        rows.append(
            {
                "n": int(n),
                "hits": hits,
                "replicas": replicas,
                "p_hat": p_hat,
                "wilson_lo": lo,
                "wilson_hi": hi,
                "rate": (-np.log(p_hat) / scale) if hits > 0 else None,
                "zero_hits": hits == 0,
            }
        )
    return {
        "v": tuple(float(c) for c in v),
        "eps": eps,
        "nu_hat": nu_hat,
        "law": law.label(),
        "seed": seed,
        "per_mesh": rows,
    }
