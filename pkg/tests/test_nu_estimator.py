"""Flow-constant estimation: grids, tables, lookups, tail and triangle checks."""

from __future__ import annotations

import json
import warnings

import numpy as np
import pytest

from percoflow.capacities import bernoulli, constant
from percoflow.errors import DegenerateTriangle, InsufficientReplicas, MissingDirection
from percoflow.nu_estimator import (
    NuEstimate,
    NuTable,
    check_weak_triangle,
    default_base,
    direction_grid,
    estimate_nu,
    nu0,
    tau_lower_tail,
)


def _entry(v, value, se=0.0):
    """Hand-built table row with a pinned nu_hat."""
    return NuEstimate(
        v=tuple(v),
        meshes=(2, 4),
        replicas=1,
        means=(value, value),
        stderrs=(se, se),
        nu_hat=value,
        stderr=se,
        trend_slope=0.0,
        A_sides=(1.0,),
        h=0.5,
        law="synthetic",
        seed=0,
    )


# ------------------------------------------------------------- grids


def test_direction_grid_2d():
    grid = direction_grid(2)
    assert len(grid) == 36
    for v in grid:
        assert np.linalg.norm(v) == pytest.approx(1.0)
    # 10-degree spacing covers the circle without repeats
    angles = sorted(np.degrees(np.arctan2(v[1], v[0])) % 360 for v in grid)
    gaps = np.diff(angles + [angles[0] + 360])
    assert np.allclose(gaps, 10.0, atol=1e-9)


def test_direction_grid_3d():
    grid = direction_grid(3)
    assert len(grid) == 26
    assert len({tuple(np.round(v, 12)) for v in grid}) == 26
    for v in grid:
        assert np.linalg.norm(v) == pytest.approx(1.0)


def test_default_base_is_unit_and_orthogonal():
    for v in [(0.0, 1.0), (0.6, 0.8), (0.0, 0.0, 1.0)]:
        A = default_base(np.asarray(v))
        assert A.area() == pytest.approx(1.0)
        assert np.allclose(A.normal, v, atol=1e-12)


# ------------------------------------------------------------- estimation


def test_constant_law_estimates_are_exact():
    est = estimate_nu((0.0, 1.0), constant(1), (2, 4, 8), 40, seed=0)
    assert est.means == pytest.approx((3 / 2, 5 / 4, 9 / 8))
    assert est.stderrs == pytest.approx((0.0, 0.0, 0.0))
    assert est.nu_hat == pytest.approx(9 / 8)  # largest mesh wins
    assert est.stderr == 0.0
    # mean = 1 + 1/n: slope against 1/n is exactly 1
    assert est.trend_slope == pytest.approx(1.0)


def test_linear_capacity_scaling_is_exact():
    a1 = estimate_nu((0.0, 1.0), constant(1), (2, 4), 30, seed=5)
    a2 = estimate_nu((0.0, 1.0), constant(2), (2, 4), 30, seed=5)
    assert a2.nu_hat == pytest.approx(2 * a1.nu_hat)
    assert a2.means == pytest.approx(tuple(2 * m for m in a1.means))


def test_meshes_must_increase():
    with pytest.raises(ValueError):
        estimate_nu((0.0, 1.0), constant(1), (4, 4), 40)
    with pytest.raises(ValueError):
        estimate_nu((0.0, 1.0), constant(1), (8, 2), 40)


def test_few_replicas_warn():
    with pytest.warns(InsufficientReplicas):
        estimate_nu((0.0, 1.0), constant(1), (2,), 5)


def test_axis_symmetry_of_the_lattice():
    """nu(e1) and nu(e2) are exchangeable by symmetry; estimates agree to 3 se."""
    e1 = estimate_nu((1.0, 0.0), bernoulli(0.6, 1), (2, 4), 120, seed=8)
    e2 = estimate_nu((0.0, 1.0), bernoulli(0.6, 1), (2, 4), 120, seed=8)
    gap = abs(e1.nu_hat - e2.nu_hat)
    combined = np.hypot(e1.stderr, e2.stderr)
    assert gap <= 3 * combined


def test_estimate_json_roundtrip():
    est = estimate_nu((0.0, 1.0), constant(1), (2, 4), 30, seed=2)
    blob = json.dumps(est.to_dict())
    again = NuEstimate.from_dict(json.loads(blob))
    assert again == est


# ------------------------------------------------------------- tables


def test_table_lookup_snaps_within_two_degrees():
    t = NuTable()
    t.add(_entry((1.0, 0.0), 1.0))
    t.add(_entry((np.cos(np.radians(10)), np.sin(np.radians(10))), 2.0))
    one_deg = np.radians(1.0)
    val, _ = t.lookup((np.cos(one_deg), np.sin(one_deg)))
    assert val == 1.0  # snapped, not blended


def test_table_lookup_blends_linearly_in_angle():
    t = NuTable()
    t.add(_entry((1.0, 0.0), 1.0, se=0.1))
    t.add(_entry((np.cos(np.radians(10)), np.sin(np.radians(10))), 2.0, se=0.1))
    for deg, expect in [(5.0, 1.5), (2.5, 1.25), (7.5, 1.75)]:
        rad = np.radians(deg)
        val, se = t.lookup((np.cos(rad), np.sin(rad)))
        assert val == pytest.approx(expect, abs=1e-9)
        assert 0 < se < 0.2


def test_table_lookup_rejects_distant_directions():
    t = NuTable()
    t.add(_entry((1.0, 0.0), 1.0))
    with pytest.raises(MissingDirection):
        t.lookup((0.0, 1.0))  # 90 degrees from the only entry
    with pytest.raises(MissingDirection):
        t.lookup((0.0, 0.0))
    with pytest.raises(MissingDirection):
        NuTable().lookup((1.0, 0.0))


def test_table_save_load_roundtrip(tmp_path, const_table):
    path = tmp_path / "table.json"
    const_table.save(path)
    again = NuTable.load(path)
    assert set(again.entries) == set(const_table.entries)
    for v in const_table.entries:
        assert again.entries[v] == const_table.entries[v]
    assert again.nu_min == const_table.nu_min
    assert again.nu_max == const_table.nu_max


def test_table_minmax(bern_table):
    vals = [e.nu_hat for e in bern_table.entries.values()]
    assert bern_table.nu_min == min(vals)
    assert bern_table.nu_max == max(vals)
    assert 0 < bern_table.nu_min <= bern_table.nu_max < 1.0


# ------------------------------------------------------------- nu0


def test_nu0_homogeneity_and_zero():
    t = NuTable()
    for v in direction_grid(2):
        t.add(_entry(tuple(v), 1.0))
    assert nu0((0.0, 0.0), t) == 0.0
    assert nu0((3.0, 0.0), t) == pytest.approx(3.0)
    assert nu0((0.0, -2.5), t) == pytest.approx(2.5)


def test_nu0_midpoint_convexity_with_margin(bern_table):
    """nu0(u + w) <= nu0(u) + nu0(w) + 3 combined se on 200 random pairs.

    The raw inequality can wobble at coarse mesh; the stderr margin is part
    of the claim, mirroring the triangle check.
    """
    rng = np.random.default_rng(17)
    violations = 0
    for _ in range(200):
        u = rng.normal(size=2)
        w = rng.normal(size=2)
        s = u + w
        ns = float(np.linalg.norm(s))
        if ns < 1e-9:
            continue
        nu_u, se_u = bern_table.lookup(u / np.linalg.norm(u))
        nu_w, se_w = bern_table.lookup(w / np.linalg.norm(w))
        nu_s, se_s = bern_table.lookup(s / ns)
        lhs = ns * nu_s
        rhs = float(np.linalg.norm(u)) * nu_u + float(np.linalg.norm(w)) * nu_w
        combined = np.sqrt(
            (ns * se_s) ** 2
            + (np.linalg.norm(u) * se_u) ** 2
            + (np.linalg.norm(w) * se_w) ** 2
        )
        if lhs > rhs + 3 * combined:
            violations += 1
    assert violations == 0


# ------------------------------------------------------------- triangles


def test_equilateral_triangle_with_flat_table():
    t = NuTable()
    for v in direction_grid(2):
        t.add(_entry(tuple(v), 1.0))
    rep = check_weak_triangle(t, (0.0, 0.0), (1.0, 0.0), (0.5, np.sqrt(3) / 2))
    assert not rep["violation"]
    # all sides length 1, flat nu: lhs 1 vs rhs 2
    assert rep["lhs"] == pytest.approx(1.0)
    assert rep["rhs"] == pytest.approx(2.0)


def test_triangle_checks_on_random_triangles(bern_table):
    rng = np.random.default_rng(23)
    checked = 0
    for _ in range(20):
        pts = rng.uniform(-1, 1, size=(3, 2))
        try:
            rep = check_weak_triangle(bern_table, *pts)
        except DegenerateTriangle:
            continue
        checked += 1
        assert not rep["violation"], rep
        assert rep["margin"] >= 0
    assert checked >= 18


def test_degenerate_triangles_raise():
    t = NuTable()
    for v in direction_grid(2):
        t.add(_entry(tuple(v), 1.0))
    with pytest.raises(DegenerateTriangle):
        check_weak_triangle(t, (0.0, 0.0), (0.0, 0.0), (1.0, 0.0))
    with pytest.raises(DegenerateTriangle):
        check_weak_triangle(t, (0.0, 0.0), (1.0, 0.0), (2.0, 0.0))


def test_triangle_in_3d_plane():
    t = NuTable()
    for v in direction_grid(3):
        t.add(_entry(tuple(v), 1.0))
    rep = check_weak_triangle(
        t, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)
    )
    assert not rep["violation"]
    assert set(rep["normals"]) == {"v_A", "v_B", "v_C"}


# ------------------------------------------------------------- lower tail


def test_tau_lower_tail_never_fires_for_constant_law():
    rep = tau_lower_tail(
        (0.0, 1.0), None, 0.5, constant(1), (4, 8), 100, eps=0.4, nu_hat=1.125
    )
    for row in rep["per_mesh"]:
        assert row["hits"] == 0
        assert row["zero_hits"]
        assert row["rate"] is None
        assert row["p_hat"] == 0.0
        assert row["wilson_lo"] == 0.0


def test_tau_lower_tail_decays_with_mesh():
    """Thresholds 1.3/1.56/1.82 share the integer bracket (1,2), so the
    event is P[tau <= 1] at every mesh and its frequency must fall."""
    rep = tau_lower_tail(
        (0.0, 1.0),
        None,
        0.5,
        bernoulli(0.6, 1),
        (10, 12, 14),
        800,
        eps=0.3367,
        nu_hat=0.4667,
        seed=3,
    )
    rows = rep["per_mesh"]
    hits = [r["hits"] for r in rows]
    assert all(h > 0 for h in hits)
    assert hits[0] > hits[1] > hits[2]
    rates = [r["rate"] for r in rows]
    assert all(r > 0 for r in rates)
    for r in rows:
        assert r["wilson_lo"] <= r["p_hat"] <= r["wilson_hi"]


def test_tau_lower_tail_eps_validation():
    with pytest.raises(ValueError):
        tau_lower_tail((0.0, 1.0), None, 0.5, constant(1), (4,), 50, eps=0.0, nu_hat=1.0)
    with pytest.raises(ValueError):
        tau_lower_tail((0.0, 1.0), None, 0.5, constant(1), (4,), 50, eps=2.0, nu_hat=1.0)
