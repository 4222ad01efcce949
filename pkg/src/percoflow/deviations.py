"""Lower-deviation experiments for the domain flow phi_n.

phi_n is the max flow from the source boundary layer to the sink boundary
layer of the discretized domain.  This module runs replica ensembles of it,
estimates the surface-order decay rate r_n = -log P[phi_n <= lambda n^(d-1)]
/ n^(d-1), and collects the size statistics of the minimal cutsets, whose
concentration at surface order is the combinatorial backbone of the decay.

The cutset reported for each run is the source-side minimal cut, not the
minimal-cardinality one among minimal cuts; size statistics therefore
upper-bound the minimal-cardinality statistics.  Every output that carries
cut sizes says so via the cut_rule field.
"""

from __future__ import annotations

import hashlib
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .capacities import CapacityField, CapacityLaw, derive_seed, edge_keys, law_checks, parse_law
from .errors import EmptyTerminal
from .geometry import Domain
from .lattice import DiscreteDomain, LatticeGraph, discretize, induced_graph
from .maxflow import Cutset, FlowSolver
from .stats import wilson_interval

CUT_RULE = "source-side"


def domain_hash(omega: Domain) -> str:
    """Short stable fingerprint of a domain's JSON form."""
    blob = json.dumps(omega.to_json_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class PhiRun:
    """One exact phi_n solve with everything the cluster analysis needs."""

    domain: Domain
    law: str
    n: int
    seed: int
    replica: int
    value: int  # quantized
    Q: int
    cut_size: int
    structurally_zero: bool  # no source or sink layer: flow is 0 by convention
    millis: float
    graph: LatticeGraph = dc_field(repr=False, default=None)
    disc: DiscreteDomain = dc_field(repr=False, default=None)
    cutset: Cutset = dc_field(repr=False, default=None)

    @property
    def real_value(self) -> float:
        return self.value / self.Q

    def summary(self) -> dict:
        return {
            "domain": domain_hash(self.domain),
            "law": self.law,
            "n": self.n,
            "seed": self.seed,
            "replica": self.replica,
            "phi_n": self.real_value,
            "cut_size": self.cut_size,
            "cut_rule": CUT_RULE,
            "structurally_zero": self.structurally_zero,
            "millis": round(self.millis, 3),
        }


def run_phi(omega: Domain, law: CapacityLaw, n: int, seed: int,
            replica: int = 0) -> PhiRun:
    """phi_n = flow(source layer -> sink layer) on the discretized domain."""
    t0 = time.perf_counter()
    disc = discretize(omega, n)
    graph = induced_graph(disc)
    F1 = disc.gamma1_indices()
    F2 = disc.gamma2_indices()
    fld = CapacityField(law, derive_seed(seed, "phi", n))
    try:
        solver = FlowSolver(graph.vertex_count(), graph.edge_u, graph.edge_v, F1, F2)
    except EmptyTerminal:
        # nothing to route between: phi_n = 0 with an empty (valid) cut
        side = _bfs_cluster(graph, F1, np.array([], dtype=np.int64))
        cut = Cutset(edges=np.array([], dtype=np.int64), capacity=0, source_side=side)
        return PhiRun(
            domain=omega, law=law.label(), n=n, seed=seed, replica=replica,
            value=0, Q=fld.Q, cut_size=0, structurally_zero=True,
            millis=(time.perf_counter() - t0) * 1e3,
            graph=graph, disc=disc, cutset=cut,
        )
    q = fld.quantized(edge_keys(graph.edge_z, graph.edge_axis), replica)
    value, res = solver.solve_quantized(q)
    result = solver.extract(value, res, q)
    return PhiRun(
        domain=omega, law=law.label(), n=n, seed=seed, replica=replica,
        value=value, Q=fld.Q, cut_size=result.cutset.size(),
        structurally_zero=False, millis=(time.perf_counter() - t0) * 1e3,
        graph=graph, disc=disc, cutset=result.cutset,
    )


def _bfs_cluster(graph: LatticeGraph, start: np.ndarray,
                 blocked_edges: np.ndarray) -> np.ndarray:
    """Open cluster of the start set when the blocked edges are closed."""
    V = graph.vertex_count()
    open_edge = np.ones(graph.edge_count(), dtype=bool)
    open_edge[blocked_edges] = False
    nbr = [[] for _ in range(V)]
    for a, b in zip(
        graph.edge_u[open_edge].tolist(), graph.edge_v[open_edge].tolist()
    ):
        nbr[a].append(b)
        nbr[b].append(a)
    seen = np.zeros(V, dtype=bool)
    stack = [int(x) for x in start]
    for x in stack:
        seen[x] = True
    while stack:
        u = stack.pop()
        for w in nbr[u]:
            if not seen[w]:
                seen[w] = True
                stack.append(w)
    return seen


def source_cluster(run: PhiRun) -> dict:
    """The open cluster of the source layer once the cutset is removed.

    Rebuilds the cluster by plain BFS (capacity 1 off the cut, 0 on it) and
    checks that its edge boundary is exactly the recorded cutset — the two
    computations come from different code paths, so this is a real audit.
    Also reports the continuum summaries: volume |cluster|/n^d and discrete
    perimeter card(boundary)/n^(d-1).
    """
    graph = run.graph
    disc = run.disc
    cluster = _bfs_cluster(graph, disc.gamma1_indices(), run.cutset.edges)
    boundary = np.flatnonzero(cluster[graph.edge_u] != cluster[graph.edge_v])
    recorded = np.sort(np.asarray(run.cutset.edges, dtype=np.int64))
    assert np.array_equal(np.sort(boundary), recorded), (
        "edge boundary of the source cluster differs from the recorded cutset"
    )
    d = graph.d
    n = run.n
    return {
        "cluster_size": int(cluster.sum()),
        "cluster_volume": float(cluster.sum() / n**d),
        "boundary_edges": int(len(boundary)),
        "discrete_perimeter": float(len(boundary) / n ** (d - 1)),
        "matches_cutset": True,
        "cut_rule": CUT_RULE,
    }


# ---------------------------------------------------------------------------
# replica ensembles (shared by the rate and cutset estimators)


def _phi_chunk(args) -> tuple:
    """Worker task: phi_n values and cut sizes for a replica range.

    Everything is rebuilt from plain dicts so the task pickles cleanly; the
    replica index alone decides each draw, so chunking is invisible in the
    output.
    """
    domain_dict, law_dict, n, lo, hi, seed = args
    omega = Domain.from_json_dict(domain_dict)
    law = parse_law(law_dict)
    disc = discretize(omega, n)
    graph = induced_graph(disc)
    solver = FlowSolver(
        graph.vertex_count(), graph.edge_u, graph.edge_v,
        disc.gamma1_indices(), disc.gamma2_indices(),
    )
    keys = edge_keys(graph.edge_z, graph.edge_axis)
    fld = CapacityField(law, derive_seed(seed, "phi", n))
    values = np.empty(hi - lo, dtype=np.int64)
    cards = np.empty(hi - lo, dtype=np.int64)
    for i, rep in enumerate(range(lo, hi)):
        q = fld.quantized(keys, rep)
        value, res = solver.solve_quantized(q)
        result = solver.extract(value, res, q)
        values[i] = value
        cards[i] = result.cutset.size()
    return n, lo, values, cards


def phi_ensemble(
    omega: Domain, law: CapacityLaw, n_grid, replicas: int, seed: int,
    workers: int = 1,
) -> dict:
    """phi_n values (quantized) and cut sizes for every (n, replica).

    Returns {n: (values, cards)} with replica order restored, so the result
    is identical for any worker count.
    """
    domain_dict = omega.to_json_dict()
    law_dict = law.to_dict()
    tasks = []
    for n in n_grid:
        n = int(n)
        if workers <= 1:
            tasks.append((domain_dict, law_dict, n, 0, replicas, seed))
        else:
            step = -(-replicas // workers)
            for lo in range(0, replicas, step):
                tasks.append(
                    (domain_dict, law_dict, n, lo, min(lo + step, replicas), seed)
                )
    if workers <= 1:
        parts = [_phi_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_phi_chunk, tasks))
    out = {}
    for n in n_grid:
        n = int(n)
        values = np.empty(replicas, dtype=np.int64)
        cards = np.empty(replicas, dtype=np.int64)
        for pn, lo, v, c in parts:
            if pn == n:
                values[lo : lo + len(v)] = v
                cards[lo : lo + len(c)] = c
        out[n] = (values, cards)
    return out


@dataclass
class RateEstimate:
    """Per-mesh lower-tail probabilities of phi_n and their decay reading."""

    lam: float
    n_grid: tuple
    replicas: int
    per_n: list  # dicts: n, hits, p_hat, wilson_lo/hi, r_n (None if no hits)
    verdict: dict
    law: str
    seed: int
    domain: str  # hash

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "n_grid": list(self.n_grid),
            "replicas": self.replicas,
            "per_n": self.per_n,
            "verdict": self.verdict,
            "law": self.law,
            "seed": self.seed,
            "domain": self.domain,
            "cut_rule": CUT_RULE,
        }


def _rate_rows(values_by_n, lam, Q, replicas, d) -> list:
    rows = []
    for n, (values, _) in values_by_n.items():
        scale = float(n) ** (d - 1)
        threshold = lam * scale
        hits = int(np.count_nonzero(values <= threshold * Q))
        p_hat = hits / replicas
        lo, hi = wilson_interval(hits, replicas)
        rows.append(
            {
                "n": int(n),
                "replicas": replicas,
                "hits": hits,
                "p_hat": p_hat,
                "wilson_lo": lo,
                "wilson_hi": hi,
                "r_n": (-float(np.log(p_hat)) / scale) if hits > 0 else None,
            }
        )
    return rows


def _rate_verdict(rows, d) -> dict:
    """Monotone-beyond-noise reading of the rate points.

    Requires every defined r_n > 0, and the rate at the largest mesh with
    hits to sit no lower than the smallest rate seen at the other meshes
    minus one Wilson half-width (of the largest mesh, in rate units).  The
    half-width absorbs the Monte Carlo noise floor.
    """
    with_hits = [r for r in rows if r["hits"] > 0]
    if not with_hits:
        return {
            "passed": False,
            "reason": "no mesh recorded a single hit; tail out of reach",
            "largest_n": None,
        }
    all_positive = all(r["r_n"] > 0 for r in with_hits)
    largest = max(with_hits, key=lambda r: r["n"])
    scale = float(largest["n"]) ** (d - 1)
    if largest["wilson_lo"] > 0:
        half_width = float(
            np.log(largest["wilson_hi"] / largest["wilson_lo"]) / 2.0 / scale
        )
    else:
        half_width = float(-np.log(largest["wilson_hi"]) / scale)
    others = [r for r in with_hits if r["n"] != largest["n"]]
    if others:
        floor = min(r["r_n"] for r in others)
        monotone = largest["r_n"] >= floor - half_width
    else:
        floor = None
        monotone = True
    return {
        "passed": bool(all_positive and monotone),
        "all_rates_positive": bool(all_positive),
        "largest_n": largest["n"],
        "r_largest": largest["r_n"],
        "r_floor_others": floor,
        "half_width_largest": half_width,
        "monotone_beyond_noise": bool(monotone),
    }


def estimate_rate(
    omega: Domain,
    law: CapacityLaw,
    lam: float,
    n_grid,
    replicas: int,
    seed: int,
    workers: int = 1,
    phi_omega_hat: float = None,
) -> RateEstimate:
    """Monte Carlo estimate of the surface-order decay of P[phi_n <= lam n^(d-1)]."""
    d = omega.d
    law_checks(law, d)  # warns on supercritical laws
    if phi_omega_hat is not None and lam >= phi_omega_hat:
        warnings.warn(
            f"lambda = {lam} is not below phi_omega_hat = {phi_omega_hat}; "
            "the event is not a lower deviation",
            stacklevel=2,
        )
    ens = phi_ensemble(omega, law, n_grid, replicas, seed, workers)
    Q = CapacityField(law, 0).Q
    rows = _rate_rows(ens, lam, Q, replicas, d)
    return RateEstimate(
        lam=float(lam),
        n_grid=tuple(int(n) for n in n_grid),
        replicas=replicas,
        per_n=rows,
        verdict=_rate_verdict(rows, d),
        law=law.label(),
        seed=seed,
        domain=domain_hash(omega),
    )


@dataclass
class CutsetStats:
    """Size statistics of the source-side minimal cutsets across meshes."""

    n_grid: tuple
    replicas: int
    beta_grid: tuple
    tails: dict  # n -> [P[card >= beta n^(d-1)] per beta]
    percentiles: dict  # n -> {"p50","p90","p99"} of card / n^(d-1)
    hist: dict  # n -> counts of card values (index = card)
    verdict: dict
    law: str
    seed: int
    domain: str

    def to_dict(self) -> dict:
        return {
            "n_grid": list(self.n_grid),
            "replicas": self.replicas,
            "beta_grid": list(self.beta_grid),
            "tails": {str(n): t for n, t in self.tails.items()},
            "percentiles": {str(n): p for n, p in self.percentiles.items()},
            "verdict": self.verdict,
            "law": self.law,
            "seed": self.seed,
            "domain": self.domain,
            "cut_rule": CUT_RULE,
        }


def cutset_tail(
    omega: Domain,
    law: CapacityLaw,
    n_grid,
    replicas: int,
    beta_grid=None,
    seed: int = 0,
    workers: int = 1,
) -> CutsetStats:
    """Empirical tails of card(cutset) at surface order beta n^(d-1).

    The verdict anchors at twice the 99th percentile of card/n^(d-1) at the
    smallest mesh and asks the tail there to shrink (non-strictly) with n.
    """
    d = omega.d
    law_checks(law, d)
    if beta_grid is None:
        beta_grid = tuple(np.arange(0.5, 8.5, 0.5))
    ens = phi_ensemble(omega, law, n_grid, replicas, seed, workers)
    tails, pcts, hist = {}, {}, {}
    for n, (_, cards) in ens.items():
        scale = float(n) ** (d - 1)
        ratio = cards / scale
        tails[n] = [float(np.mean(cards >= b * scale)) for b in beta_grid]
        pcts[n] = {
            "p50": float(np.percentile(ratio, 50)),
            "p90": float(np.percentile(ratio, 90)),
            "p99": float(np.percentile(ratio, 99)),
        }
        hist[n] = np.bincount(cards).tolist()
    smallest = min(int(n) for n in n_grid)
    beta_star = 2.0 * pcts[smallest]["p99"]
    at_star = []
    for n in sorted(int(x) for x in n_grid):
        scale = float(n) ** (d - 1)
        at_star.append(float(np.mean(ens[n][1] >= beta_star * scale)))
    shrinks = all(b <= a for a, b in zip(at_star, at_star[1:])) and (
        at_star[-1] <= at_star[0]
    )
    return CutsetStats(
        n_grid=tuple(int(n) for n in n_grid),
        replicas=replicas,
        beta_grid=tuple(float(b) for b in beta_grid),
        tails=tails,
        percentiles=pcts,
        hist=hist,
        verdict={
            "beta_star": beta_star,
            "anchor_n": smallest,
            "tails_at_beta_star": at_star,
            "passed": bool(shrinks),
        },
        law=law.label(),
        seed=seed,
        domain=domain_hash(omega),
    )


# ---------------------------------------------------------------------------
# CSV renderings (strings only; the CLI owns atomic file placement)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def rate_csv_text(est: RateEstimate) -> str:
    lines = ["n,replicas,hits,p_hat,wilson_lo,wilson_hi,r_n"]
    for r in sorted(est.per_n, key=lambda r: r["n"]):
        lines.append(
            ",".join(
                _fmt(r[k])
                for k in ("n", "replicas", "hits", "p_hat", "wilson_lo",
                          "wilson_hi", "r_n")
            )
        )
    return "\n".join(lines) + "\n"


def cutset_csv_text(stats: CutsetStats) -> str:
    lines = ["n,beta,tail"]
    for n in sorted(stats.tails):
        for b, t in zip(stats.beta_grid, stats.tails[n]):
            lines.append(f"{n},{_fmt(float(b))},{_fmt(t)}")
    return "\n".join(lines) + "\n"
