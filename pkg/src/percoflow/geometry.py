"""Continuous geometry: box domains with tagged boundary faces, oriented
hyperrectangles, cylinders, and half-space clipping.

Macroscopic coordinates are exact rationals (fractions.Fraction) wherever the
input is rational; unit vectors with irrational components are floats with a
1e-12 tolerance.  The L-infinity distance, used by the discretizer, is exact
for box unions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyBox, NonpositiveHeight, NoSourceOrSink, PercoflowError

FLOAT_TOL = 1e-12

TAGS = ("source", "sink", "neutral")


def as_frac(x) -> Fraction:
    """Coerce to an exact rational.

    Floats go through their shortest decimal repr, so 0.1 means 1/10 (not the
    binary float); strings accept both "3/4" and "0.75".
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(str(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as a rational")


def frac_str(x: Fraction) -> str:
    return str(x)


def _dot(a, b):
    return sum(ai * bi for ai, bi in zip(a, b))


def _sub(a, b):
    return tuple(ai - bi for ai, bi in zip(a, b))


# ---------------------------------------------------------------------------
# boxes, facets, domains


@dataclass(frozen=True)
class Box:
    """Open axis-aligned box prod_i (lo_i, hi_i) with rational corners."""

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi dimension mismatch")
        if any(l >= h for l, h in zip(self.lo, self.hi)):
            raise EmptyBox(f"degenerate box {self.lo}..{self.hi}")

    @property
    def d(self) -> int:
        return len(self.lo)

    def contains(self, x, closed: bool = False) -> bool:
        if closed:
            return all(l <= xi <= h for l, xi, h in zip(self.lo, x, self.hi))
        return all(l < xi < h for l, xi, h in zip(self.lo, x, self.hi))

    def volume(self) -> Fraction:
        v = Fraction(1)
        for l, h in zip(self.lo, self.hi):
            v *= h - l
        return v

    def linf_distance(self, x) -> Fraction:
        """Exact L-infinity distance from x to the closure."""
        best = Fraction(0)
        for l, xi, h in zip(self.lo, x, self.hi):
            gap = max(l - xi, xi - h, Fraction(0))
            if gap > best:
                best = gap
        return best


@dataclass(frozen=True)
class Facet:
    """Closed axis-aligned (d-1)-box lying in a hyperplane x_axis = const.

    `orientation` is the outward sense (+1 or -1 along `axis`); lo[axis] ==
    hi[axis] gives the plane offset.
    """

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]
    axis: int
    orientation: int
    tag: str = "neutral"

    def __post_init__(self):
        if self.lo[self.axis] != self.hi[self.axis]:
            raise ValueError("facet must be flat along its axis")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError("facet with inverted corners")
        if self.orientation not in (-1, 1):
            raise ValueError("orientation must be +-1")
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def offset(self) -> Fraction:
        return self.lo[self.axis]

    def normal(self) -> tuple[int, ...]:
        n = [0] * self.d
        n[self.axis] = self.orientation
        return tuple(n)

    def area(self) -> Fraction:
        a = Fraction(1)
        for k, (l, h) in enumerate(zip(self.lo, self.hi)):
            if k != self.axis:
                a *= h - l
        return a

    def linf_distance(self, x) -> Fraction:
        best = Fraction(0)
        for l, xi, h in zip(self.lo, x, self.hi):
            gap = max(l - xi, xi - h, Fraction(0))
            if gap > best:
                best = gap
        return best


def _boxes_touch(a: Box, b: Box) -> bool:
    return all(al <= bh and bl <= ah for al, ah, bl, bh in zip(a.lo, a.hi, b.lo, b.hi))


@dataclass(frozen=True)
class Domain:
    """Bounded open body (union of open boxes) with tagged boundary facets.

    Source facets compose the inflow boundary, sink facets the outflow
    boundary; everything else is neutral.
    """

    d: int
    boxes: tuple[Box, ...]
    facets: tuple[Facet, ...]

    def __post_init__(self):
        if not self.boxes:
            raise EmptyBox("domain needs at least one box")
        if any(b.d != self.d for b in self.boxes):
            raise ValueError("box dimension mismatch")
        if any(f.d != self.d for f in self.facets):
            raise ValueError("facet dimension mismatch")
        self._check_connected()
        for f in self.facets:
            self._check_on_boundary(f)
        if not any(f.tag == "source" for f in self.facets):
            raise NoSourceOrSink("no source facet")
        if not any(f.tag == "sink" for f in self.facets):
            raise NoSourceOrSink("no sink facet")

    def _check_connected(self):
        # union-find over boxes whose closures touch
        parent = list(range(len(self.boxes)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, j in combinations(range(len(self.boxes)), 2):
            if _boxes_touch(self.boxes[i], self.boxes[j]):
                parent[find(i)] = find(j)
        if len({find(i) for i in range(len(self.boxes))}) > 1:
            raise PercoflowError("domain body is not connected")

    def _check_on_boundary(self, f: Facet):
        mid = tuple((l + h) / 2 for l, h in zip(f.lo, f.hi))
        if self.contains(mid, closed=False):
            raise PercoflowError(f"facet at {mid} lies inside the body")
        if self.linf_distance(mid) != 0:
            raise PercoflowError(f"facet at {mid} is not on the boundary")

    def contains(self, x, closed: bool = False) -> bool:
        return any(b.contains(x, closed=closed) for b in self.boxes)

    def linf_distance(self, x) -> Fraction:
        return min(b.linf_distance(x) for b in self.boxes)

    def bounding_box(self) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
        lo = tuple(min(b.lo[k] for b in self.boxes) for k in range(self.d))
        hi = tuple(max(b.hi[k] for b in self.boxes) for k in range(self.d))
        return lo, hi

    def source_facets(self) -> tuple[Facet, ...]:
        return tuple(f for f in self.facets if f.tag == "source")

    def sink_facets(self) -> tuple[Facet, ...]:
        return tuple(f for f in self.facets if f.tag == "sink")

    def to_json_dict(self) -> dict:
        return {
            "schema": "percoflow/1",
            "kind": "domain",
            "d": self.d,
            "boxes": [
                [[frac_str(v) for v in b.lo], [frac_str(v) for v in b.hi]]
                for b in self.boxes
            ],
            "faces": [
                {
                    "lo": [frac_str(v) for v in f.lo],
                    "hi": [frac_str(v) for v in f.hi],
                    "normal": [str(c) for c in f.normal()],
                    "tag": f.tag,
                }
                for f in self.facets
            ],
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "Domain":
        d = int(doc["d"])
        boxes = tuple(
            Box(tuple(as_frac(v) for v in lo), tuple(as_frac(v) for v in hi))
            for lo, hi in doc["boxes"]
        )
        facets = []
        for fd in doc["faces"]:
            lo = tuple(as_frac(v) for v in fd["lo"])
            hi = tuple(as_frac(v) for v in fd["hi"])
            normal = [as_frac(v) for v in fd["normal"]]
            axis = max(range(d), key=lambda k: abs(normal[k]))
            orientation = 1 if normal[axis] > 0 else -1
            facets.append(Facet(lo, hi, axis, orientation, fd.get("tag", "neutral")))
        return Domain(d, boxes, tuple(facets))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @staticmethod
    def load(path) -> "Domain":
        with open(path) as fh:
            return Domain.from_json_dict(json.load(fh))


def make_box_domain(bounds: Sequence, tags: dict | None = None) -> Domain:
    """Single open box with its 2d faces, tagged via {(axis, "lo"|"hi"): tag}.

    Untagged faces are neutral.  Needs at least one source and one sink face.
    """
    lo = tuple(as_frac(b[0]) for b in bounds)
    hi = tuple(as_frac(b[1]) for b in bounds)
    box = Box(lo, hi)
    d = box.d
    tags = dict(tags or {})
    facets = []
    for axis in range(d):
        for side, orient in (("lo", -1), ("hi", 1)):
            flo = list(lo)
            fhi = list(hi)
            val = lo[axis] if side == "lo" else hi[axis]
            flo[axis] = fhi[axis] = val
            tag = tags.pop((axis, side), "neutral")
            facets.append(Facet(tuple(flo), tuple(fhi), axis, orient, tag))
    if tags:
        raise ValueError(f"unknown face keys {sorted(tags)}")
    return Domain(d, (box,), tuple(facets))


def unit_square_domain() -> Domain:
    """(0,1)^2 with source on the left face and sink on the right face."""
    return make_box_domain(
        [(0, 1), (0, 1)], {(0, "lo"): "source", (0, "hi"): "sink"}
    )


def linf_distance(x, S) -> Fraction:
    """Exact L-infinity distance from a rational point to a box-like set.

    S may be a Domain, Box or Facet, a bare point, or any iterable mix of
    those (facet lists, point clouds, ...).  Empty S has infinite distance.
    """
    x = tuple(as_frac(v) for v in x)
    if isinstance(S, (Domain, Box, Facet)):
        return S.linf_distance(x)
    items = list(S)
    if not items:
        return Fraction(10**12)  # effectively +inf, stays rational
    if all(isinstance(v, (int, float, Fraction)) for v in items):
        # S itself is a single point
        return max(abs(as_frac(v) - xi) for v, xi in zip(items, x))
    return min(linf_distance(x, s) for s in items)


# ---------------------------------------------------------------------------
# oriented hyperrectangles and cylinders (float geometry, 1e-12 tolerance)


def _normalize(v: np.ndarray) -> np.ndarray:
    nrm = float(np.linalg.norm(v))
    if nrm == 0:
        raise ValueError("zero vector")
    return v / nrm


def unit_frame(v: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the hyperplane orthogonal to v."""
    v = _normalize(np.asarray(v, dtype=float))
    d = v.shape[0]
    if d == 2:
        return np.array([[-v[1], v[0]]])
    # start from the axis least aligned with v, then Gram-Schmidt
    k = int(np.argmin(np.abs(v)))
    u1 = np.zeros(d)
    u1[k] = 1.0
    u1 = _normalize(u1 - np.dot(u1, v) * v)
    if d == 3:
        u2 = np.cross(v, u1)
        return np.array([u1, u2])
    frame = [u1]
    for e in np.eye(d):
        w = e - np.dot(e, v) * v
        for u in frame:
            w = w - np.dot(w, u) * u
        if np.linalg.norm(w) > 1e-9:
            frame.append(_normalize(w))
        if len(frame) == d - 1:
            break
    return np.array(frame)


@dataclass(frozen=True)
class Hyperrectangle:
    """Flat (d-1)-dimensional box: center, unit normal, side lengths.

    The spanning frame is derived from the normal unless given explicitly;
    area() is the product of side lengths.
    """

    center: np.ndarray
    normal: np.ndarray
    side_lengths: np.ndarray
    frame: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        normal = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(normal) - 1.0) > FLOAT_TOL:
            raise ValueError("normal must be a unit vector (1e-12)")
        sides = np.asarray(self.side_lengths, dtype=float)
        if sides.shape != (center.shape[0] - 1,) or np.any(sides <= 0):
            raise ValueError("need d-1 positive side lengths")
        frame = self.frame
        if frame is None:
            frame = unit_frame(normal)
        frame = np.asarray(frame, dtype=float)
        for u in frame:
            if abs(np.dot(u, normal)) > 1e-9:
                raise ValueError("frame not orthogonal to normal")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "side_lengths", sides)
        object.__setattr__(self, "frame", frame)

    @property
    def d(self) -> int:
        return self.center.shape[0]

    def area(self) -> float:
        return float(np.prod(self.side_lengths))


def straight_hyperrectangle(side_lengths, d: int | None = None) -> Hyperrectangle:
    """prod_i [0,k_i] x {0}: axis-aligned base in the hyperplane x_d = 0."""
    sides = np.asarray(side_lengths, dtype=float)
    d = d or sides.shape[0] + 1
    normal = np.zeros(d)
    normal[-1] = 1.0
    center = np.zeros(d)
    center[:-1] = sides / 2
    frame = np.eye(d)[:-1]
    return Hyperrectangle(center, normal, sides, frame)


@dataclass(frozen=True)
class Cylinder:
    """cyl(A,h) = {x + t*v : x in A, t in [-h,h]} for a hyperrectangle A."""

    base: Hyperrectangle
    h: float

    def __post_init__(self):
        if self.h <= 0:
            raise NonpositiveHeight(f"h = {self.h}")

    @property
    def d(self) -> int:
        return self.base.d

    def contains(self, p, tol: float = FLOAT_TOL) -> bool:
        rel = np.asarray(p, dtype=float) - self.base.center
        if abs(float(np.dot(rel, self.base.normal))) > self.h + tol:
            return False
        for u, s in zip(self.base.frame, self.base.side_lengths):
            if abs(float(np.dot(rel, u))) > s / 2 + tol:
                return False
        return True

    def contains_many(self, pts: np.ndarray, tol: float = FLOAT_TOL) -> np.ndarray:
        """Vectorized membership for an (N, d) array of points."""
        rel = np.asarray(pts, dtype=float) - self.base.center
        ok = np.abs(rel @ self.base.normal) <= self.h + tol
        for u, s in zip(self.base.frame, self.base.side_lengths):
            ok &= np.abs(rel @ u) <= s / 2 + tol
        return ok

    def side_of_base(self, p, tol: float = FLOAT_TOL) -> int:
        """+1 / -1 for the two open components of cyl minus hyp(A); 0 on the plane."""
        t = float(np.dot(np.asarray(p, dtype=float) - self.base.center, self.base.normal))
        if t > tol:
            return 1
        if t < -tol:
            return -1
        return 0

    def side_of_base_many(self, pts: np.ndarray, tol: float = FLOAT_TOL) -> np.ndarray:
        """Vectorized side labels (+1, -1, 0) for an (N, d) array."""
        t = (np.asarray(pts, dtype=float) - self.base.center) @ self.base.normal
        out = np.zeros(len(t), dtype=np.int8)
        out[t > tol] = 1
        out[t < -tol] = -1
        return out

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        ext = self.h * np.abs(self.base.normal)
        for u, s in zip(self.base.frame, self.base.side_lengths):
            ext = ext + (s / 2) * np.abs(u)
        return self.base.center - ext, self.base.center + ext


def cyl(A: Hyperrectangle, h: float) -> Cylinder:
    return Cylinder(A, float(h))


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball, for segment-containment queries."""

    center: tuple
    radius: float

    def contains(self, x, tol: float = FLOAT_TOL) -> bool:
        dx = np.asarray(x, dtype=np.float64) - np.asarray(self.center, dtype=np.float64)
        return bool(np.dot(dx, dx) <= (self.radius + tol) ** 2)


# ---------------------------------------------------------------------------
# convex clipping (exact over rationals, tolerant over floats)


def _solve_linear(rows, rhs, tol):
    """Solve a small dense system by Gaussian elimination; None if singular."""
    d = len(rhs)
    M = [list(rows[i]) + [rhs[i]] for i in range(d)]
    for col in range(d):
        piv = None
        best = tol
        for r in range(col, d):
            mag = abs(M[r][col])
            if mag > best:
                best = mag
                piv = r
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        pivval = M[col][col]
        for r in range(d):
            if r != col and M[r][col] != 0:
                f = M[r][col] / pivval
                for c in range(col, d + 1):
                    M[r][c] -= f * M[col][c]
    return tuple(M[i][d] / M[i][i] for i in range(d))


def _norm_exact(vec):
    """Euclidean norm; exact Fraction when the squared norm is a perfect square."""
    s = sum(v * v for v in vec)
    if isinstance(s, Fraction):
        num, den = s.numerator, s.denominator
        rn, rd = math.isqrt(num), math.isqrt(den)
        if rn * rn == num and rd * rd == den:
            return Fraction(rn, rd)
        return math.sqrt(num / den)
    return math.sqrt(float(s))


class ConvexPolytope:
    """Bounded intersection of half-spaces {a.x <= b}, dimensions 1..3.

    Vertices are enumerated from (d choose d)-subsets of the planes; faces are
    recovered per half-space.  Arithmetic follows the input type: all-Fraction
    input stays exact, float input uses the package tolerance.
    """

    def __init__(self, halfspaces, tol=None):
        self.halfspaces = list(halfspaces)
        self.d = len(self.halfspaces[0][0])
        exact = all(
            isinstance(b, (Fraction, int)) and all(isinstance(c, (Fraction, int)) for c in a)
            for a, b in self.halfspaces
        )
        self.exact = exact
        self.tol = 0 if exact and tol is None else (tol if tol is not None else FLOAT_TOL)
        self.vertices = self._enumerate_vertices()

    def _enumerate_vertices(self):
        d = self.d
        verts = []
        for idxs in combinations(range(len(self.halfspaces)), d):
            rows = [self.halfspaces[i][0] for i in idxs]
            rhs = [self.halfspaces[i][1] for i in idxs]
            x = _solve_linear(rows, rhs, self.tol if not self.exact else 0)
            if x is None:
                continue
            if all(_dot(a, x) <= b + self.tol for a, b in self.halfspaces):
                verts.append(x)
        # dedup
        out = []
        for v in verts:
            if not any(all(abs(vi - wi) <= self.tol for vi, wi in zip(v, w)) for w in out):
                out.append(v)
        return out

    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    def face_vertices(self, i: int):
        a, b = self.halfspaces[i]
        slack = self.tol if not self.exact else 0
        return [v for v in self.vertices if abs(_dot(a, v) - b) <= slack]

    def _order_polygon(self, verts, plane_normal=None):
        """Cyclic order of coplanar points (float ordering; values untouched)."""
        pts = np.array([[float(c) for c in v] for v in verts])
        ctr = pts.mean(axis=0)
        if self.d == 2 or plane_normal is None and pts.shape[1] == 2:
            ang = np.arctan2(pts[:, 1] - ctr[1], pts[:, 0] - ctr[0])
            order = np.argsort(ang, kind="stable")
        else:
            nrm = np.asarray([float(c) for c in plane_normal])
            nrm = nrm / np.linalg.norm(nrm)
            basis = unit_frame(nrm)
            rel = pts - ctr
            uu = rel @ basis[0]
            vv = rel @ basis[1]
            order = np.argsort(np.arctan2(vv, uu), kind="stable")
        return [verts[i] for i in order]

    def face_measure(self, i: int):
        """(d-1)-measure of the face lying on half-space i."""
        verts = self.face_vertices(i)
        if self.d == 1:
            return (Fraction(1) if self.exact else 1.0) if verts else Fraction(0)
        if len(verts) < self.d:
            return Fraction(0) if self.exact else 0.0
        if self.d == 2:
            # segment length between extreme points
            best = None
            for p, q in combinations(verts, 2):
                diff = _sub(p, q)
                s = sum(c * c for c in diff)
                if best is None or s > best[0]:
                    best = (s, diff)
            return _norm_exact(best[1])
        ordered = self._order_polygon(verts, self.halfspaces[i][0])
        # polygon vector area = 1/2 * sum of cross products
        zero = Fraction(0) if self.exact else 0.0
        acc = [zero, zero, zero]
        o = ordered[0]
        for p, q in zip(ordered[1:], ordered[2:]):
            u = _sub(p, o)
            w = _sub(q, o)
            acc[0] += u[1] * w[2] - u[2] * w[1]
            acc[1] += u[2] * w[0] - u[0] * w[2]
            acc[2] += u[0] * w[1] - u[1] * w[0]
        return _norm_exact([a / 2 for a in acc])

    def volume(self):
        if self.is_empty():
            return Fraction(0) if self.exact else 0.0
        if self.d == 1:
            vals = [v[0] for v in self.vertices]
            return max(vals) - min(vals)
        if self.d == 2:
            ordered = self._order_polygon(self.vertices)
            area2 = Fraction(0) if self.exact else 0.0
            for p, q in zip(ordered, ordered[1:] + ordered[:1]):
                area2 += p[0] * q[1] - q[0] * p[1]
            return abs(area2) / 2
        total = Fraction(0) if self.exact else 0.0
        for i, (a, _) in enumerate(self.halfspaces):
            verts = self.face_vertices(i)
            if len(verts) < 3:
                continue
            ordered = self._order_polygon(verts, a)
            # orient the fan outward (along a) before summing tetrahedra
            o = ordered[0]
            nx = ny = nz = Fraction(0) if self.exact else 0.0
            for p, q in zip(ordered[1:], ordered[2:]):
                u = _sub(p, o)
                w = _sub(q, o)
                nx += u[1] * w[2] - u[2] * w[1]
                ny += u[2] * w[0] - u[0] * w[2]
                nz += u[0] * w[1] - u[1] * w[0]
            sign = 1 if (nx * a[0] + ny * a[1] + nz * a[2]) > 0 else -1
            for p, q in zip(ordered[1:], ordered[2:]):
                det = (
                    o[0] * (p[1] * q[2] - p[2] * q[1])
                    - o[1] * (p[0] * q[2] - p[2] * q[0])
                    + o[2] * (p[0] * q[1] - p[1] * q[0])
                )
                total += sign * det
        return abs(total) / 6


def box_halfspaces(box: Box):
    """The 2d face inequalities of a closed box, keyed (axis, side)."""
    out = []
    for axis in range(box.d):
        lo_n = tuple(Fraction(-1) if k == axis else Fraction(0) for k in range(box.d))
        hi_n = tuple(Fraction(1) if k == axis else Fraction(0) for k in range(box.d))
        out.append(((axis, "lo"), (lo_n, -box.lo[axis])))
        out.append(((axis, "hi"), (hi_n, box.hi[axis])))
    return out


@dataclass
class ClipFacet:
    """One boundary piece of a clipped body: area, outward normal, and where it
    sits (interior cut plane, or a tagged boundary face of the domain)."""

    area: object  # Fraction or float
    normal: tuple
    location: str  # "interior" | "gamma1" | "gamma2" | "neutral"


@dataclass
class SurfaceSet:
    """Polyhedral F inside a domain, decomposed into energy-carrying facets.

    interior facets are the cut surface inside the body; gamma2 facets are the
    sink-boundary pieces touching F; gamma1 facets are the source-boundary
    pieces touching the complement; neutral pieces carry no energy.
    """

    domain: Domain
    facets: list[ClipFacet]
    volume: object  # Fraction or float
    description: str

    def perimeter(self):
        """Interior surface measure of F in the body (polyhedral identity)."""
        return sum((f.area for f in self.facets if f.location == "interior"), Fraction(0))

    def facet_total(self, location: str):
        return sum((f.area for f in self.facets if f.location == location), Fraction(0))


def _facet_clip_measure(facet: Facet, v, c, sense: int, tol):
    """Measure of {x in facet : sense*(v.x) <= sense*c}, clipped in-plane."""
    d = facet.d
    axes = [k for k in range(d) if k != facet.axis]
    if not axes:
        raise ValueError("1-d domains are not supported")
    fixed = facet.offset
    # box constraints of the facet, written in the reduced (in-plane) coordinates
    halfspaces = []
    for j, k in enumerate(axes):
        lo_n = tuple(Fraction(-1 if i == j else 0) for i in range(len(axes)))
        hi_n = tuple(Fraction(1 if i == j else 0) for i in range(len(axes)))
        halfspaces.append((lo_n, -facet.lo[k]))
        halfspaces.append((hi_n, facet.hi[k]))
    w = tuple(sense * v[k] for k in axes)
    rhs = sense * c - sense * v[facet.axis] * fixed
    if all(x == 0 for x in w):
        # facet plane parallel to the cut: all or nothing
        if 0 <= rhs + tol:
            return facet.area()
        return Fraction(0) if isinstance(rhs, Fraction) else 0.0
    halfspaces.append((w, rhs))
    poly = ConvexPolytope(halfspaces, tol=None if tol == 0 else tol)
    return poly.volume()


def halfspace_clip(omega: Domain, v, c) -> SurfaceSet:
    """F = omega intersect {x . v <= c}, with its boundary facet decomposition.

    Rational v and c keep every area and volume exact; float input is handled
    to 1e-12.  Only single-box bodies are supported (the clip of a general box
    union would need facet merging across shared interfaces).
    """
    if len(omega.boxes) != 1:
        raise PercoflowError("halfspace_clip supports single-box domains only")
    box = omega.boxes[0]
    d = omega.d
    exact = all(isinstance(x, (int, Fraction)) for x in (*v, c))
    if exact:
        v = tuple(as_frac(x) for x in v)
        c = as_frac(c)
        tol = 0
    else:
        v = tuple(float(x) for x in v)
        c = float(c)
        tol = FLOAT_TOL

    keyed = box_halfspaces(box)
    halfspaces = [hs for _, hs in keyed] + [(v, c)]
    poly = ConvexPolytope(halfspaces, tol=None if exact else tol)
    cut_index = len(halfspaces) - 1

    facets: list[ClipFacet] = []
    zero = Fraction(0) if exact else 0.0

    if poly.is_empty():
        volume = zero
        desc = "empty"
    else:
        volume = poly.volume()
        desc = f"halfspace v={tuple(float(x) for x in v)} c={float(c)}"

    # interior cut facet, unless the cut plane coincides with a body face
    if not poly.is_empty():
        on_body_face = any(
            all(abs(v[k] - a[k]) <= tol for k in range(d)) and abs(c - b) <= tol
            for _, (a, b) in keyed
        )
        cut_area = poly.face_measure(cut_index)
        if cut_area > 0 and not on_body_face:
            facets.append(ClipFacet(cut_area, v, "interior"))

    # boundary pieces: sink faces touching F, source faces touching omega \ F,
    # neutral faces touching F (zero-energy, kept for bookkeeping)
    for f in omega.facets:
        vf = tuple(Fraction(x) if exact else float(x) for x in f.normal())
        if f.tag == "sink":
            area = _facet_clip_measure(f, v, c, +1, tol)
            if area > 0:
                facets.append(ClipFacet(area, vf, "gamma2"))
        elif f.tag == "source":
            area = _facet_clip_measure(f, v, c, -1, tol)
            if area > 0:
                facets.append(ClipFacet(area, vf, "gamma1"))
        else:
            area = _facet_clip_measure(f, v, c, +1, tol)
            if area > 0:
                facets.append(ClipFacet(area, vf, "neutral"))

    return SurfaceSet(omega, facets, volume, desc)


def empty_set(omega: Domain) -> SurfaceSet:
    """F = empty: only the source boundary carries energy."""
    facets = [
        ClipFacet(f.area(), tuple(Fraction(c) for c in f.normal()), "gamma1")
        for f in omega.source_facets()
    ]
    return SurfaceSet(omega, facets, Fraction(0), "empty")


def full_set(omega: Domain) -> SurfaceSet:
    """F = omega: only the sink boundary carries energy."""
    facets = [
        ClipFacet(f.area(), tuple(Fraction(c) for c in f.normal()), "gamma2")
        for f in omega.sink_facets()
    ]
    neutral = [
        ClipFacet(f.area(), tuple(Fraction(c) for c in f.normal()), "neutral")
        for f in omega.facets
        if f.tag == "neutral"
    ]
    vol = sum((b.volume() for b in omega.boxes), Fraction(0))
    return SurfaceSet(omega, facets + neutral, vol, "full")
