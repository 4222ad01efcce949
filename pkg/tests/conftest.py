"""Shared fixtures: a couple of nu tables that several test modules reuse.

Building a direction table means thousands of tiny max-flow solves, so the
expensive ones are session-scoped and built once.
"""

from __future__ import annotations

import pytest

from percoflow import bernoulli, build_nu_table, constant


@pytest.fixture(scope="session")
def bern_table():
    """36-direction table for bernoulli(0.6, 1) at coarse meshes."""
    return build_nu_table(bernoulli(0.6, 1), d=2, meshes=(2, 4), replicas=60, seed=11)


@pytest.fixture(scope="session")
def const_table():
    """Deterministic table: constant(1), so nu_hat has zero spread."""
    return build_nu_table(constant(1), d=2, meshes=(2, 4), replicas=30, seed=7)
