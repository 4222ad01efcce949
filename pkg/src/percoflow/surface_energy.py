"""Surface energy of polyhedral subsets and the half-space candidate search.

The energy of a set F inside the domain adds three boundary integrals of
the directional constant nu: over the cut surface inside the body (normal
of F), over the sink-boundary pieces F touches, and over the source-
boundary pieces its complement touches (both with the domain's outward
normal).  With polyhedral F every integral is a finite sum of
area * nu(normal) terms.

phi_omega_search minimizes that energy over a declared family — half-space
clips on a direction x offset grid plus the two endpoints F = empty and
F = omega — so its output is an upper bound for the true infimum, tagged
with the family that produced it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from math import sqrt

import numpy as np

from .geometry import (  # noqa: F401  (re-exported as part of this module's API)
    ClipFacet,
    Domain,
    SurfaceSet,
    empty_set,
    full_set,
    halfspace_clip,
)
from .nu_estimator import NuTable


@dataclass
class EnergyValue:
    """I(F) with its three-term breakdown and propagated table uncertainty."""

    value: float
    interior_term: float
    gamma2_term: float
    gamma1_term: float
    stderr: float
    description: str
    table_ref: str = ""

    def breakdown(self) -> dict:
        return {
            "interior": self.interior_term,
            "gamma2": self.gamma2_term,
            "gamma1": self.gamma1_term,
        }


def energy(F: SurfaceSet, table: NuTable) -> EnergyValue:
    """Sum of area * nu(normal) over the energy-carrying facets of F.

    Interior facets use the outward normal of F itself; gamma1/gamma2
    facets carry the domain's outward normal, which the clip recorded on
    them.  Neutral facets contribute nothing.
    """
    terms = {"interior": 0.0, "gamma2": 0.0, "gamma1": 0.0}
    var = 0.0
    for f in F.facets:
        if f.location == "neutral":
            continue
        area = float(f.area)
        if area == 0.0:
            continue
        val, se = table.lookup(f.normal)
        terms[f.location] += area * val
        var += (area * se) ** 2
    total = terms["interior"] + terms["gamma2"] + terms["gamma1"]
    return EnergyValue(
        value=total,
        interior_term=terms["interior"],
        gamma2_term=terms["gamma2"],
        gamma1_term=terms["gamma1"],
        stderr=sqrt(var),
        description=F.description,
    )


@dataclass
class SearchResult:
    """Outcome of the candidate-family minimization."""

    phi_omega_hat: float
    stderr: float
    argmin: dict
    trace: list = dc_field(default_factory=list)
    family: dict = dc_field(default_factory=dict)
    table_ref: str = ""

    def to_dict(self) -> dict:
        return {
            "phi_omega_hat": self.phi_omega_hat,
            "stderr": self.stderr,
            "argmin": self.argmin,
            "family": self.family,
            "nu_table_ref": self.table_ref,
            "trace": self.trace,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def _offset_range(omega: Domain, v) -> tuple[float, float]:
    """Range of x . v over the domain's bounding-box corners."""
    lo, hi = omega.bounding_box()
    lo = np.array([float(c) for c in lo])
    hi = np.array([float(c) for c in hi])
    v = np.asarray(v, dtype=float)
    corners_min = float(np.dot(np.where(v >= 0, lo, hi), v))
    corners_max = float(np.dot(np.where(v >= 0, hi, lo), v))
    return corners_min, corners_max


def phi_omega_search(
    omega: Domain,
    table: NuTable,
    directions=None,
    n_offsets: int = 19,
) -> SearchResult:
    """Minimize the energy over half-space clips plus the two endpoints.

    directions defaults to the table's own grid; offsets are n_offsets
    evenly spaced interior positions of the cut plane along each direction.
    The result is an upper bound for the variational minimum — a richer
    family can only lower it.
    """
    source = directions if directions is not None else table.directions()
    dirs = [tuple(float(c) for c in v) for v in source]
    trace = []
    best = None

    for name, F in (("empty", empty_set(omega)), ("full", full_set(omega))):
        ev = energy(F, table)
        rec = {"kind": name, "I": ev.value, "stderr": ev.stderr}
        trace.append(rec)
        if best is None or ev.value < best[0].value:
            best = (ev, {"kind": name})

    for v in dirs:
        c_lo, c_hi = _offset_range(omega, v)
        span = c_hi - c_lo
        for j in range(1, n_offsets + 1):
            c = c_lo + span * j / (n_offsets + 1)
            F = halfspace_clip(omega, v, c)
            ev = energy(F, table)
            rec = {"kind": "cut", "v": list(v), "c": c, "I": ev.value,
                   "stderr": ev.stderr}
            trace.append(rec)
            if ev.value < best[0].value:
                best = (ev, {"kind": "cut", "v": list(v), "c": c})

    ev, argmin = best
    return SearchResult(
        phi_omega_hat=ev.value,
        stderr=ev.stderr,
        argmin=argmin,
        trace=trace,
        family={
            "directions": [list(v) for v in dirs],
            "n_offsets": n_offsets,
            "endpoints": ["empty", "full"],
        },
    )
