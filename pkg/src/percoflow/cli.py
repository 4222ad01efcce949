"""Command-line front end: config-driven, reproducible experiment runs.

Subcommands: flow, nu, rate, cutset, phi-omega, selftest.  Flags mirror
config-file keys one to one and win over the file.  Machine-readable JSON
goes to stdout, progress chatter to stderr, and artifacts are written
atomically (temp file + rename) with a manifest carrying the config echo,
its hash, and wall time — timestamps never touch the data files, so equal
configs give byte-identical CSVs.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .capacities import parse_law
from .deviations import (
    cutset_csv_text,
    cutset_tail,
    estimate_rate,
    rate_csv_text,
    run_phi,
    source_cluster,
)
from .errors import PercoflowError
from .geometry import Domain, unit_square_domain
from .maxflow import FlowSolver
from .nu_estimator import NuTable, direction_grid, estimate_nu
from .surface_energy import phi_omega_search

SCHEMA = "percoflow/1"


class ConfigError(Exception):
    """Anything wrong with the requested configuration (exit code 2)."""


def _say(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _emit(payload: dict) -> None:
    payload = {"schema": SCHEMA, **payload}
    print(json.dumps(payload, sort_keys=True), flush=True)


def atomic_write(path: Path, text: str) -> None:
    tmp = path.parent / f".{path.name}.tmp{os.getpid()}"
    tmp.write_text(text)
    os.replace(tmp, path)


def _load_domain(spec: str) -> Domain:
    if spec is None:
        raise ConfigError("a domain is required (--domain PATH|JSON|unit-square)")
    if spec == "unit-square":
        return unit_square_domain()
    try:
        if spec.strip().startswith("{"):
            return Domain.from_json_dict(json.loads(spec))
        return Domain.load(spec)
    except FileNotFoundError as exc:
        raise ConfigError(f"domain file not found: {exc.filename}") from exc
    except (json.JSONDecodeError, KeyError, ValueError, PercoflowError) as exc:
        raise ConfigError(f"bad domain spec: {exc}") from exc


def _load_law(spec):
    if spec is None:
        raise ConfigError("a capacity law is required (--law JSON)")
    try:
        if isinstance(spec, str):
            spec = json.loads(spec)
        return parse_law(spec)
    except (json.JSONDecodeError, ValueError) as exc:
        raise ConfigError(f"bad law spec: {exc}") from exc


def _parse_number_list(raw, kind=float):
    if raw is None:
        return None
    if isinstance(raw, (list, tuple)):
        return [kind(x) for x in raw]
    try:
        return [kind(x) for x in str(raw).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad list {raw!r}: {exc}") from exc


def _merge_config(args: argparse.Namespace) -> dict:
    """File config first, then any flag that was actually given."""
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config file {args.config} line {exc.lineno}: {exc.msg}"
            ) from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    for key, value in vars(args).items():
        if key in ("command", "config", "func"):
            continue
        if value is not None:
            cfg[key] = value
    return cfg


def _need(cfg: dict, key: str):
    if cfg.get(key) is None:
        raise ConfigError(f"missing required option --{key.replace('_', '-')}")
    return cfg[key]


def _outdir(cfg: dict) -> Path:
    out = cfg.get("out")
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _manifest(out: Path, command: str, cfg: dict, wall: float, written) -> None:
    echo = {k: v for k, v in cfg.items() if k != "func"}
    blob = json.dumps(echo, sort_keys=True, default=str)
    manifest = {
        "schema": SCHEMA,
        "command": command,
        "config": json.loads(blob),
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "version": __version__,
        "wall_seconds": round(wall, 3),
        "written": sorted(written),
    }
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=1) + "\n")


def _workers(cfg: dict) -> int:
    w = cfg.get("workers")
    if w is None:
        return os.cpu_count() or 1
    w = int(w)
    if w < 1:
        raise ConfigError("--workers must be >= 1")
    return w


# ---------------------------------------------------------------------------
# subcommands


def cmd_flow(cfg: dict) -> int:
    omega = _load_domain(_need(cfg, "domain"))
    law = _load_law(_need(cfg, "law"))
    n = int(_need(cfg, "n"))
    seed = int(cfg.get("seed", 0))
    t0 = time.perf_counter()
    run = run_phi(omega, law, n, seed, replica=int(cfg.get("replica", 0)))
    cluster = source_cluster(run)
    summary = {
        "command": "flow",
        **run.summary(),
        "cluster": cluster,
    }
    out = _outdir(cfg)
    if out is not None:
        written = []
        atomic_write(out / "flow.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
        written.append("flow.json")
        lines = ["z" + ",z".join(str(k) for k in range(run.graph.d)) + ",axis"]
        for i in run.cutset.edges:
            z = run.graph.edge_z[i]
            lines.append(",".join(str(int(c)) for c in z) + f",{int(run.graph.edge_axis[i])}")
        atomic_write(out / "cut.csv", "\n".join(lines) + "\n")
        written.append("cut.csv")
        _manifest(out, "flow", cfg, time.perf_counter() - t0, written)
    _emit(summary)
    return 0


def cmd_nu(cfg: dict) -> int:
    law = _load_law(_need(cfg, "law"))
    d = int(cfg.get("d", 2))
    meshes = _parse_number_list(_need(cfg, "meshes"), int)
    replicas = int(_need(cfg, "replicas"))
    seed = int(cfg.get("seed", 0))
    h = float(cfg.get("h", 0.5))
    t0 = time.perf_counter()
    single = cfg.get("direction")
    if single is not None:
        v = _parse_number_list(single, float)
        if len(v) != d:
            raise ConfigError(f"direction has {len(v)} components, d={d}")
        dirs = [tuple(v)]
    else:
        dirs = direction_grid(d)
    table = NuTable()
    for i, v in enumerate(dirs):
        _say(f"nu: direction {i + 1}/{len(dirs)}")
        table.add(estimate_nu(v, law, meshes, replicas, h=h, seed=seed))
    out = _outdir(cfg)
    if out is not None:
        text = json.dumps(table.to_list(), indent=1) + "\n"
        atomic_write(out / "nu_table.json", text)
        _manifest(out, "nu", cfg, time.perf_counter() - t0, ["nu_table.json"])
    first = next(iter(table.entries.values()))
    _emit(
        {
            "command": "nu",
            "directions": len(dirs),
            "nu_min": table.nu_min,
            "nu_max": table.nu_max,
            "first": first.to_dict(),
            "seed": seed,
        }
    )
    return 0


def cmd_rate(cfg: dict) -> int:
    omega = _load_domain(_need(cfg, "domain"))
    law = _load_law(_need(cfg, "law"))
    lam = float(_need(cfg, "lam"))
    n_grid = _parse_number_list(_need(cfg, "meshes"), int)
    replicas = int(_need(cfg, "replicas"))
    seed = int(cfg.get("seed", 0))
    workers = _workers(cfg)
    t0 = time.perf_counter()
    _say(f"rate: {len(n_grid)} meshes x {replicas} replicas on {workers} workers")
    est = estimate_rate(omega, law, lam, n_grid, replicas, seed, workers=workers)
    _say(f"rate: done in {time.perf_counter() - t0:.1f}s")
    out = _outdir(cfg)
    if out is not None:
        written = []
        atomic_write(out / "rate.csv", rate_csv_text(est))
        written.append("rate.csv")
        atomic_write(out / "rate.json",
                     json.dumps({"schema": SCHEMA, **est.to_dict()}, indent=1) + "\n")
        written.append("rate.json")
        _manifest(out, "rate", cfg, time.perf_counter() - t0, written)
    _emit({"command": "rate", **est.to_dict()})
    return 0


def cmd_cutset(cfg: dict) -> int:
    omega = _load_domain(_need(cfg, "domain"))
    law = _load_law(_need(cfg, "law"))
    n_grid = _parse_number_list(_need(cfg, "meshes"), int)
    replicas = int(_need(cfg, "replicas"))
    beta_grid = _parse_number_list(cfg.get("beta_grid"), float)
    seed = int(cfg.get("seed", 0))
    workers = _workers(cfg)
    t0 = time.perf_counter()
    _say(f"cutset: {len(n_grid)} meshes x {replicas} replicas on {workers} workers")
    stats = cutset_tail(omega, law, n_grid, replicas, beta_grid, seed, workers=workers)
    _say(f"cutset: done in {time.perf_counter() - t0:.1f}s")
    out = _outdir(cfg)
    if out is not None:
        written = []
        atomic_write(out / "cutset.csv", cutset_csv_text(stats))
        written.append("cutset.csv")
        atomic_write(out / "cutset.json",
                     json.dumps({"schema": SCHEMA, **stats.to_dict()}, indent=1) + "\n")
        written.append("cutset.json")
        _manifest(out, "cutset", cfg, time.perf_counter() - t0, written)
    _emit({"command": "cutset", **stats.to_dict()})
    return 0


def cmd_phi_omega(cfg: dict) -> int:
    omega = _load_domain(_need(cfg, "domain"))
    t0 = time.perf_counter()
    table_path = cfg.get("nu_table")
    if table_path is not None:
        try:
            table = NuTable.load(table_path)
        except FileNotFoundError as exc:
            raise ConfigError(f"nu table not found: {table_path}") from exc
        table_ref = str(table_path)
    else:
        law = _load_law(_need(cfg, "law"))
        meshes = _parse_number_list(_need(cfg, "meshes"), int)
        replicas = int(_need(cfg, "replicas"))
        seed = int(cfg.get("seed", 0))
        table = NuTable()
        dirs = direction_grid(omega.d)
        for i, v in enumerate(dirs):
            _say(f"phi-omega: table direction {i + 1}/{len(dirs)}")
            table.add(estimate_nu(v, law, meshes, replicas,
                                  h=float(cfg.get("h", 0.5)), seed=seed))
        table_ref = f"inline:{law.label()}"
    res = phi_omega_search(omega, table, n_offsets=int(cfg.get("n_offsets", 19)))
    res.table_ref = table_ref
    out = _outdir(cfg)
    if out is not None:
        atomic_write(out / "phi_omega.json",
                     json.dumps({"schema": SCHEMA, **res.to_dict()}, indent=1) + "\n")
        _manifest(out, "phi-omega", cfg, time.perf_counter() - t0, ["phi_omega.json"])
    payload = res.to_dict()
    payload.pop("trace")  # stdout stays small; the file keeps the full trace
    _emit({"command": "phi-omega", **payload})
    return 0


def cmd_selftest(cfg: dict) -> int:
    """Brute-force oracle suite: solver vs exhaustive cuts, stream audits."""
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    trials = int(cfg.get("replicas") or 200)
    t0 = time.perf_counter()
    checked = 0
    for trial in range(trials):
        V = int(rng.integers(4, 8))
        target_edges = int(rng.integers(3, 13))
        seen = set()
        eu, ev = [], []
        for _ in range(target_edges):
            a, b = (int(x) for x in rng.integers(0, V, 2))
            if a == b or (min(a, b), max(a, b)) in seen:
                continue
            seen.add((min(a, b), max(a, b)))
            eu.append(min(a, b))
            ev.append(max(a, b))
        if not eu:
            continue
        caps = rng.integers(0, 50, len(eu)).astype(np.int64)
        solver = FlowSolver(V, eu, ev, [0], [V - 1])
        value, res = solver.solve_quantized(caps)
        result = solver.extract(value, res, caps)
        # exhaustive minimum over all source-side bipartitions
        free = [x for x in range(V) if x not in (0, V - 1)]
        best = None
        for bits in range(1 << len(free)):
            side = {0}
            for i, x in enumerate(free):
                if bits >> i & 1:
                    side.add(x)
            c = sum(
                int(caps[k])
                for k in range(len(eu))
                if (eu[k] in side) != (ev[k] in side)
            )
            best = c if best is None else min(best, c)
        if value != best:
            _say(f"selftest: duality mismatch on trial {trial}: {value} vs {best}")
            return 1
        checked += 1
    dt = time.perf_counter() - t0
    _emit({"command": "selftest", "instances": checked, "passed": True,
           "wall_seconds": round(dt, 3)})
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--seed", type=int, help="master seed (echoed in outputs)")
    p.add_argument("--out", help="output directory for artifacts")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="percoflow",
        description="First-passage percolation maximal flows: estimation "
        "of the flow constant, surface energies, and lower-deviation rates.",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flow", help="one exact phi_n solve on a domain")
    _add_common(p)
    p.add_argument("--domain", help="domain JSON (path, inline, or unit-square)")
    p.add_argument("--law", help='capacity law JSON, e.g. {"kind":"constant","a":1}')
    p.add_argument("--n", type=int, help="mesh")
    p.add_argument("--replica", type=int, help="replica index (default 0)")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("nu", help="estimate the flow constant nu(v)")
    _add_common(p)
    p.add_argument("--law", help="capacity law JSON")
    p.add_argument("--d", type=int, help="dimension (2 or 3), default 2")
    p.add_argument("--direction", help="single direction 'vx,vy[,vz]'; default full grid")
    p.add_argument("--meshes", help="comma-separated mesh list, e.g. 2,4,8")
    p.add_argument("--replicas", type=int, help="replicas per mesh")
    p.add_argument("--h", type=float, help="cylinder half-height (default 0.5)")
    p.set_defaults(func=cmd_nu)

    p = sub.add_parser("rate", help="lower-deviation rate of phi_n")
    _add_common(p)
    p.add_argument("--domain", help="domain JSON (path, inline, or unit-square)")
    p.add_argument("--law", help="capacity law JSON")
    p.add_argument("--lambda", dest="lam", type=float, help="deviation level")
    p.add_argument("--meshes", help="mesh grid, e.g. 4,6,8,10,12,14")
    p.add_argument("--replicas", type=int, help="replicas per mesh")
    p.add_argument("--workers", type=int, help="parallel workers (default: all cores)")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("cutset", help="minimal cutset size statistics")
    _add_common(p)
    p.add_argument("--domain", help="domain JSON (path, inline, or unit-square)")
    p.add_argument("--law", help="capacity law JSON")
    p.add_argument("--meshes", help="mesh grid, e.g. 6,10,14")
    p.add_argument("--replicas", type=int, help="replicas per mesh")
    p.add_argument("--beta-grid", dest="beta_grid", help="comma floats (default 0.5..8)")
    p.add_argument("--workers", type=int, help="parallel workers (default: all cores)")
    p.set_defaults(func=cmd_cutset)

    p = sub.add_parser("phi-omega", help="candidate-family surface-energy minimum")
    _add_common(p)
    p.add_argument("--domain", help="domain JSON (path, inline, or unit-square)")
    p.add_argument("--nu-table", dest="nu_table", help="nu_table.json from the nu command")
    p.add_argument("--law", help="law JSON (builds a table when --nu-table absent)")
    p.add_argument("--meshes", help="mesh list for the inline table")
    p.add_argument("--replicas", type=int, help="replicas for the inline table")
    p.add_argument("--h", type=float, help="cylinder half-height (default 0.5)")
    p.add_argument("--n-offsets", dest="n_offsets", type=int,
                   help="cut offsets per direction (default 19)")
    p.set_defaults(func=cmd_phi_omega)

    p = sub.add_parser("selftest", help="brute-force oracle suite")
    _add_common(p)
    p.add_argument("--replicas", type=int, help="number of random instances (default 200)")
    p.set_defaults(func=cmd_selftest)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
    except ConfigError as exc:
        _say(f"config error: {exc}")
        return 2
    try:
        return args.func(cfg)
    except ConfigError as exc:
        _say(f"config error: {exc}")
        return 2
    except (PercoflowError, OSError, ValueError) as exc:
        _say(f"runtime failure: {type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
