"""Batch experiment driver.

Builds an index under the chosen scheme, runs queries, compares shared
schemes against their plaintext twins and everything against brute force,
and writes a deterministic JSON/CSV report.  Every run is reproducible
from (config, seed); wall-clock timings go to a sidecar file so the main
report stays byte-identical across repeated runs.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import struct
import sys
import time
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import demo
from .bitgraph import Bitgraph, partition_gamma, reconstruct_graph, edge_set
from .field import MERSENNE_61, SQUARED_EUCLIDEAN, KeyedPrg, scale_vector
from .hnsw import LayeredGraphIndex, brute_force_ann, sample_level
from .leakage import (
    CostLedger,
    build_leakage_report,
    expected_bitgraph_share_ops,
    expected_naive_share_ops,
    mss_size,
    share_bitgraph_index,
    share_graph_index,
)
from .protocol import (
    BasicScheme,
    IndexConfig,
    MirrorScheme,
    PlainBitgraphIndex,
    RealScheme,
    save_snapshot,
    setup,
)

REPORT_VERSION = 1
SCHEMES = ("basic", "mirror", "real", "plaintext-hnsw", "plaintext-bitgraph", "brute")
ENV_PREFIX = "SHAREANN_"

_REPORT_KEYS = {
    "schema_version", "scheme", "config", "recall_at_theta",
    "exact_match_rate", "counters", "leakage", "results_digest",
    "log_fingerprint", "checks", "ok",
}
_REQUIRED_KEYS = {"schema_version", "scheme", "config", "recall_at_theta",
                  "checks", "ok"}


class FormatError(Exception):
    """Malformed dataset file; carries line or byte offset context."""


@dataclass
class ExperimentConfig:
    scheme: str = "real"
    n: int = 3
    t: int = 2
    rho: int = 4
    dim: int = 16
    count: int = 200
    theta: int = 10
    queries: int = 20
    seed: int = 1
    dataset: str | None = None
    format: str = "csv"
    out: str | None = None
    m: int = 8
    ef_construction: int = 32
    keep_log: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme in ("basic", "mirror", "real") and not (
                self.n >= self.t >= 1):
            raise ValueError(f"party schemes need n >= t >= 1, got n={self.n} t={self.t}")
        if self.theta < 1:
            raise ValueError("theta must be at least 1")
        if self.seed is None:
            raise ValueError("seed is mandatory")


# -- dataset handling ---------------------------------------------------------


def ingest(path: str | Path, format: str, dim: int | None = None) -> list[tuple[float, ...]]:
    """Read vectors from csv or flat little-endian float32."""
    path = Path(path)
    if format == "csv":
        vectors = []
        width = None
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = tuple(float(x) for x in line.split(","))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise FormatError(
                    f"{path}:{lineno}: expected {width} columns, got {len(row)}")
            vectors.append(row)
        return vectors
    if format == "flat-binary-f32":
        if not dim:
            raise FormatError("flat-binary-f32 needs a vector dimension")
        blob = path.read_bytes()
        if len(blob) % (4 * dim):
            raise FormatError(
                f"{path}: {len(blob)} bytes is not a multiple of {4 * dim}")
        flat = [x[0] for x in struct.iter_unpack("<f", blob)]
        return [tuple(flat[i:i + dim]) for i in range(0, len(flat), dim)]
    raise FormatError(f"unknown format {format!r}")


def write_csv_vectors(path: str | Path, vectors) -> None:
    Path(path).write_text(
        "\n".join(",".join(repr(float(c)) for c in v) for v in vectors) + "\n")


def write_flat_binary(path: str | Path, vectors) -> None:
    out = bytearray()
    for v in vectors:
        for c in v:
            out += struct.pack("<f", float(c))
    Path(path).write_bytes(bytes(out))


def synthetic_vectors(count: int, dim: int, rho: int, seed) -> list[tuple[float, ...]]:
    """Uniform in [-1, 1]^dim quantized to rho decimals, so every value is
    exactly representable at the fixed-point scale."""
    gen = np.random.default_rng(
        int.from_bytes(hashlib.sha256(str(seed).encode()).digest()[:8], "big"))
    raw = gen.uniform(-1.0, 1.0, size=(count, dim))
    return [tuple(float(x) for x in np.round(row, rho)) for row in raw]


# -- report handling ----------------------------------------------------------


def load_report(path: str | Path) -> dict:
    """Read a report back, rejecting unknown fields or versions."""
    data = json.loads(Path(path).read_text())
    unknown = set(data) - _REPORT_KEYS
    if unknown:
        raise ValueError(f"unknown report fields: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(data)
    if missing:
        raise ValueError(f"missing report fields: {sorted(missing)}")
    if data["schema_version"] != REPORT_VERSION:
        raise ValueError(f"unsupported report version {data['schema_version']!r}")
    return data


def _recall(found: list[int], truth: list[int]) -> float:
    if not truth:
        return 1.0
    return len(set(found) & set(truth)) / len(truth)


def _digest_results(all_ids: list[list[int]]) -> str:
    h = hashlib.sha256()
    for ids in all_ids:
        h.update(",".join(map(str, ids)).encode() + b";")
    return h.hexdigest()


# -- the run operation --------------------------------------------------------


def run(config: ExperimentConfig) -> dict:
    """Execute one experiment; returns the report dict and writes files
    under config.out when set."""
    t0 = time.perf_counter()
    if config.dataset:
        data = ingest(config.dataset, config.format, config.dim)
        if not data:
            raise FormatError(f"{config.dataset}: no vectors")
        data = [tuple(round(c, config.rho) for c in v) for v in data]
    else:
        data = synthetic_vectors(config.count, config.dim, config.rho, config.seed)
    dim = len(data[0])
    queries = synthetic_vectors(config.queries, dim, config.rho,
                                f"{config.seed}-queries")
    scaled = [scale_vector(v, config.rho) for v in data]
    scaled_q = [scale_vector(q, config.rho) for q in queries]
    truth = [brute_force_ann(q, scaled, config.theta) for q in scaled_q]

    idx_cfg = IndexConfig(m=config.m, ef_construction=config.ef_construction)
    checks: dict[str, bool] = {}
    counters: dict | None = None
    leak = None
    log_fp = None
    exact_rate = None
    all_ids: list[list[int]] = []

    if config.scheme == "brute":
        all_ids = [brute_force_ann(q, scaled, config.theta) for q in scaled_q]
        checks["brute_is_truth"] = all_ids == truth
    elif config.scheme == "plaintext-hnsw":
        index = LayeredGraphIndex(m=config.m, ef_construction=config.ef_construction)
        rng = KeyedPrg(config.seed).child("levels")
        for v in scaled:
            index.insert(v, sample_level(rng, index.ml))
        all_ids = [index.search(q, config.theta) for q in scaled_q]
        checks["hierarchy"] = index.check_hierarchy()
    elif config.scheme == "plaintext-bitgraph":
        index = PlainBitgraphIndex(idx_cfg)
        rng = KeyedPrg(config.seed).child("levels")
        for v in scaled:
            index.insert(v, sample_level(rng, idx_cfg.level_norm()))
        all_ids = [index.search(q, config.theta)[0] for q in scaled_q]
        leak = _leakage_for(index.repo, index.top, len(scaled), scaled,
                            config.theta)
    else:
        state = setup(n=config.n, t=config.t, rho=config.rho, seed=config.seed)
        if config.scheme == "basic":
            scheme = BasicScheme(state, keep_log=config.keep_log)
            for v in data:
                scheme.insert(0, v)
            twin_ids = truth
            for q, sq in zip(queries, scaled_q):
                ids, _ = scheme.search(0, q, config.theta)
                all_ids.append(ids)
        elif config.scheme == "mirror":
            scheme = MirrorScheme(state, idx_cfg, keep_log=config.keep_log)
            for v in data:
                scheme.insert(0, v)
            ref = LayeredGraphIndex(m=config.m,
                                    ef_construction=config.ef_construction)
            rng = KeyedPrg(config.seed).child("levels")
            for v in scaled:
                ref.insert(v, sample_level(rng, ref.ml))
            twin_ids = [ref.search(q, config.theta) for q in scaled_q]
            for q in queries:
                ids, _ = scheme.search(0, q, config.theta)
                all_ids.append(ids)
        else:  # real
            scheme = RealScheme(state, idx_cfg, keep_log=config.keep_log)
            for v in data:
                scheme.insert(0, v)
            twin = PlainBitgraphIndex(idx_cfg)
            rng = KeyedPrg(config.seed).child("levels")
            for v in scaled:
                twin.insert(v, sample_level(rng, idx_cfg.level_norm()))
            twin_ids = [twin.search(q, config.theta)[0] for q in scaled_q]
            for q in queries:
                ids, _, _ = scheme.search(0, q, config.theta)
                all_ids.append(ids)
            leak = _leakage_for(scheme.repo, scheme.top, len(scaled), scaled,
                                config.theta)
            checks["sigma_equals_inserts"] = state.sigma == len(data)
        matches = sum(ids == t for ids, t in zip(all_ids, twin_ids))
        exact_rate = matches / len(all_ids) if all_ids else 1.0
        checks["oracle_equality"] = exact_rate == 1.0
        scheme.ledger.params.update({"d": dim, "V": len(data)})
        counters = scheme.ledger.snapshot()
        if config.keep_log:
            log_fp = scheme.network.log.fingerprint()

    recall = sum(_recall(ids, t) for ids, t in zip(all_ids, truth)) / len(all_ids)
    ok = all(checks.values())
    config_dict = asdict(config)
    config_dict.pop("out")  # output location is not part of the experiment
    report = {
        "schema_version": REPORT_VERSION,
        "scheme": config.scheme,
        "config": config_dict,
        "recall_at_theta": recall,
        "exact_match_rate": exact_rate,
        "counters": counters,
        "leakage": leak.to_jsonable() if leak else None,
        "results_digest": _digest_results(all_ids),
        "log_fingerprint": log_fp,
        "checks": checks,
        "ok": ok,
    }
    elapsed = time.perf_counter() - t0

    if config.out:
        outdir = Path(config.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.json").write_text(
            json.dumps(report, indent=1, sort_keys=True) + "\n")
        (outdir / "timing.json").write_text(
            json.dumps({"wall_seconds": elapsed}) + "\n")
        if counters:
            with open(outdir / "counters.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["counter", "value"])
                for k, v in counters.items():
                    if k != "params":
                        w.writerow([k, v])
        if leak:
            with open(outdir / "leakage.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["element", "interface_one", "interface_two",
                            "interface_three", "qualified"])
                for s in leak.samples:
                    w.writerow([s["element"], s["interface_one"],
                                s["interface_two"], s["interface_three"],
                                s["qualified"]])
        if config.scheme == "real":
            save_snapshot(scheme, outdir / "snapshot")
            if config.keep_log:
                (outdir / "messages.log").write_text(scheme.network.log.export())
    return report


def _leakage_for(repo: Bitgraph, upper_layers: int, ced_size: int,
                 scaled, theta: int, sample_cap: int = 16):
    from .hnsw import squared_euclidean
    elements = sorted(repo.vertex_index)[:sample_cap]
    return build_leakage_report(
        repo, upper_layers, ced_size, elements, theta,
        theta_is_distance=False,
        dist_between=lambda a, b: squared_euclidean(scaled[a], scaled[b]))


# -- cost curve ---------------------------------------------------------------


def cost_curve(sizes: list[int], dim: int, n: int, t: int, rho: int, seed,
               m: int = 8, ef_construction: int = 32) -> list[dict]:
    """Naive versus bitgraph index-sharing cost over growing datasets.

    Builds single-layer indexes over the same data with both structures,
    then actually shares each index and records the counters; the ratio
    tracks the average degree."""
    rows = []
    params_kw = dict(n=n, t=t, rho=rho)
    for size in sizes:
        data = synthetic_vectors(size, dim, rho, f"{seed}-{size}")
        scaled = [scale_vector(v, rho) for v in data]
        field_vecs = [[c % MERSENNE_61 for c in v] for v in scaled]
        graph = LayeredGraphIndex(m=m, ml=0.0, ef_construction=ef_construction)
        for v in scaled:
            graph.insert(v, 0)
        bitg = PlainBitgraphIndex(IndexConfig(m=m, ml=0.0,
                                              ef_construction=ef_construction))
        for v in scaled:
            bitg.insert(v, 0)
        state = setup(seed=f"{seed}-share-{size}", **params_kw)
        naive_ledger = CostLedger("mirror-index")
        share_graph_index(graph.layers[0], field_vecs, state.params,
                          state.insert_keys, naive_ledger)
        bitg_ledger = CostLedger("bitgraph-index")
        share_bitgraph_index(bitg.repo, field_vecs, state.params,
                             state.insert_keys, bitg_ledger)
        edges = graph.edge_count(0)
        entries = bitg.repo.total_entries
        assert naive_ledger.share_ops == expected_naive_share_ops(dim, n, edges)
        assert bitg_ledger.share_ops == expected_bitgraph_share_ops(dim, n, entries)
        rows.append({
            "size": size,
            "edges": edges,
            "entries": entries,
            "dup": bitg.repo.duplicate_count,
            "avg_degree": 2 * edges / size,
            "naive_share_ops": naive_ledger.share_ops,
            "bitgraph_share_ops": bitg_ledger.share_ops,
            "ratio": naive_ledger.share_ops / bitg_ledger.share_ops,
        })
    return rows


def write_cost_curve(rows: list[dict], outdir: str | Path,
                     plot: bool = False) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "cost_curve.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    if plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots()
        ax.plot([r["size"] for r in rows], [r["naive_share_ops"] for r in rows],
                marker="o", label="naive graph sharing")
        ax.plot([r["size"] for r in rows], [r["bitgraph_share_ops"] for r in rows],
                marker="s", label="bitgraph sharing")
        ax.set_xlabel("vectors")
        ax.set_ylabel("share invocations")
        ax.legend()
        fig.savefig(outdir / "cost_curve.png", dpi=120)
        plt.close(fig)


# -- the seven-vertex demo ----------------------------------------------------


def demo_fig3(out: str | Path | None = None) -> int:
    """Partition the worked example, print both branches, diff against the
    packaged golden file, and check reconstruction; returns an exit code."""
    bg = demo.build_bitgraph()
    lines = bg.to_lines()
    golden = resources.files("shareann").joinpath(
        "data/seven_vertex_golden.txt").read_text().splitlines()
    for row in demo.lettered_lines(bg):
        print(row)
    status = 0
    if lines != golden:
        print("GOLDEN MISMATCH")
        for got, want in zip(lines + ["<eof>"] * len(golden),
                             golden + ["<eof>"] * len(lines)):
            marker = "  " if got == want else "! "
            print(f"{marker}got {got!r} want {want!r}")
        status = 1
    adj = reconstruct_graph(bg)
    edges = edge_set(adj)
    expected = {tuple(sorted(e)) for e in demo.EDGES}
    print(f"entries={bg.total_entries} duplicates={bg.duplicate_count} "
          f"edges={len(edges)} mss={mss_size(demo.adjacency())}")
    if edges != expected:
        print("RECONSTRUCTION MISMATCH")
        status = 1
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "seven_vertex.txt").write_text("\n".join(lines) + "\n")
    print("golden check:", "ok" if status == 0 else "FAILED")
    return status


# -- argument plumbing --------------------------------------------------------


def _env(name: str, cast, fallback):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return fallback
    if cast is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    return cast(raw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shareann",
        description="threshold-shared nearest-neighbor search experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="build an index, query it, emit a report")
    p_run.add_argument("--scheme", choices=SCHEMES,
                       default=_env("scheme", str, "real"))
    p_run.add_argument("--n", type=int, default=_env("n", int, 3))
    p_run.add_argument("--t", type=int, default=_env("t", int, 2))
    p_run.add_argument("--rho", type=int, default=_env("rho", int, 4))
    p_run.add_argument("--dim", type=int, default=_env("dim", int, 16))
    p_run.add_argument("--count", type=int, default=_env("count", int, 200))
    p_run.add_argument("--theta", type=int, default=_env("theta", int, 10))
    p_run.add_argument("--queries", type=int, default=_env("queries", int, 20))
    p_run.add_argument("--seed", type=int, default=_env("seed", int, 1))
    p_run.add_argument("--dataset", default=_env("dataset", str, None))
    p_run.add_argument("--format", choices=("csv", "flat-binary-f32"),
                       default=_env("format", str, "csv"))
    p_run.add_argument("--out", default=_env("out", str, None))
    p_run.add_argument("--m", type=int, default=_env("m", int, 8))
    p_run.add_argument("--ef-construction", type=int,
                       default=_env("ef_construction", int, 32))
    p_run.add_argument("--no-log", action="store_true")

    p_demo = sub.add_parser("demo-fig3", help="golden check of the worked example")
    p_demo.add_argument("--out", default=None)

    p_curve = sub.add_parser("cost-curve",
                             help="naive vs bitgraph sharing-cost table")
    p_curve.add_argument("--sizes", default="100,200,400,800,1400,2000")
    p_curve.add_argument("--dim", type=int, default=8)
    p_curve.add_argument("--n", type=int, default=3)
    p_curve.add_argument("--t", type=int, default=2)
    p_curve.add_argument("--rho", type=int, default=4)
    p_curve.add_argument("--seed", type=int, default=1)
    p_curve.add_argument("--out", default="cost-curve-out")
    p_curve.add_argument("--plot", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "demo-fig3":
        return demo_fig3(args.out)
    if args.command == "cost-curve":
        sizes = [int(s) for s in args.sizes.split(",")]
        rows = cost_curve(sizes, args.dim, args.n, args.t, args.rho, args.seed)
        write_cost_curve(rows, args.out, plot=args.plot)
        for r in rows:
            print(f"size={r['size']:5d} ratio={r['ratio']:.2f} "
                  f"avg_degree={r['avg_degree']:.2f}")
        return 0
    try:
        config = ExperimentConfig(
            scheme=args.scheme, n=args.n, t=args.t, rho=args.rho, dim=args.dim,
            count=args.count, theta=args.theta, queries=args.queries,
            seed=args.seed, dataset=args.dataset, format=args.format,
            out=args.out, m=args.m, ef_construction=args.ef_construction,
            keep_log=not args.no_log)
        report = run(config)
    except Exception as exc:  # propagate with a nonzero exit code
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"scheme={report['scheme']} recall@{config.theta}="
          f"{report['recall_at_theta']:.3f} "
          f"exact_match={report['exact_match_rate']} ok={report['ok']}")
    return 0 if report["ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
