"""Command-line entry point: ``tsgraph <command> ...``.

Commands::

    generate     write a synthetic collection in the text format
    ingest       re-key a collection with arbitrary id tokens to integer ids
    deploy       partition a collection and write per-host slices
    run          run a bundled application over a deployment
    bench-scan   deploy a collection under several layouts and scan each

``--root`` (or the ``TSGRAPH_ROOT`` environment variable) names the
deployment directory for ``deploy`` and ``run`` and the working directory
for ``bench-scan``.

Exit codes: 0 success, 1 runtime error, 2 usage error, 3 invalid input data.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import apps
from .bench import SCAN_ORDERS, deployment_path, sweep
from .engine import Pattern, RunConfig, run
from .errors import InfeasibleSpecError, TSGraphError, UnknownVertexError
from .generate import TOPOLOGIES, GenSpec, bench_spec, generate, traceroute_attrs
from .model import validate
from .store.deploy import deploy
from .store.host import Deployment
from .store.layout import BalanceMetric, LayoutConfig
from .textio import FormatError, default_root, ingest, read_collection, write_collection

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_INVALID = 0, 1, 2, 3

log = logging.getLogger("tsgraph")


class UsageError(Exception):
    pass


class InvalidInput(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--root", type=Path, help="deployment root; overrides $TSGRAPH_ROOT")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="output format")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tsgraph", description=__doc__.split("\n")[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a synthetic collection")
    g.add_argument("out", type=Path)
    g.add_argument("--bench", action="store_true", help="the default benchmark collection")
    g.add_argument("--vertices", type=int, default=1000)
    g.add_argument("--edges", type=int, help="exact edge count (must be feasible for the topology)")
    g.add_argument("--topology", choices=TOPOLOGIES, default="small-world")
    g.add_argument("--degree", type=int, default=4)
    g.add_argument("--rewire", type=float, default=0.1)
    g.add_argument("--components", type=int, default=1)
    g.add_argument("--directed", action="store_true")
    g.add_argument("--instances", type=int, default=4)
    g.add_argument("--duration", type=int, default=7200)
    g.add_argument("--attrs", choices=("latency", "traceroute"), default="latency")
    g.add_argument("--exists-flip", type=float, default=0.0, help="fraction of elements with isExists false")

    i = sub.add_parser("ingest", parents=[common], help="map arbitrary id tokens to integers")
    i.add_argument("source", type=Path)
    i.add_argument("out", type=Path)

    d = sub.add_parser("deploy", parents=[common], help="partition and write slices")
    d.add_argument("collection", type=Path)
    d.add_argument("--hosts", type=int, default=4)
    d.add_argument("--bins", type=int, default=1, help="bins per partition")
    d.add_argument("--ipack", type=int, default=1, help="instances per slice")
    d.add_argument("--balance", choices=[m.value for m in BalanceMetric], default="vertices+edges")

    r = sub.add_parser("run", parents=[common], help="run an application over a deployment")
    r.add_argument("app", help=f"one of {', '.join(apps.APPS)}")
    r.add_argument("--pattern", choices=[p.value for p in Pattern], help="override the app's pattern")
    r.add_argument("--cache-slots", type=int, default=14)
    r.add_argument("--workers", type=int, default=1, help="workers per host")
    r.add_argument("--time-range", type=int, nargs=2, metavar=("START", "END"))
    r.add_argument("--source", type=int, help="source vertex (sssp, nhop) or initial location (track)")
    r.add_argument("--n-hops", type=int, default=6)
    r.add_argument("--target-id", help="value to follow (track)")
    r.add_argument("--search-depth", type=int, default=3)
    r.add_argument("--pr-iters", type=int, default=30)
    r.add_argument("--temporal", action="store_true", help="sssp: time-respecting arrival times")
    r.add_argument("--out", type=Path, help="write results here instead of stdout")
    r.add_argument("--stats", type=Path, help="write per-timestep run statistics CSV here")

    b = sub.add_parser("bench-scan", parents=[common], help="scan a deployment sweep")
    b.add_argument("--collection", type=Path, help="collection directory (default: generated bench collection)")
    b.add_argument("--hosts", type=int, default=4)
    b.add_argument("--bins", type=_int_list, default=[4, 8])
    b.add_argument("--ipack", type=_int_list, default=[1, 5])
    b.add_argument("--caches", type=_int_list, default=[0, 14])
    b.add_argument("--order", choices=SCAN_ORDERS, default="subgraph")
    b.add_argument("--rows-dir", type=Path, help="also write per-subgraph rows for every configuration")
    b.add_argument("--out", type=Path, help="write the summary here instead of stdout")
    return p


def _root(args) -> Path:
    root = args.root or default_root()
    if root is None:
        raise UsageError("no root: pass --root or set TSGRAPH_ROOT")
    return root


def _emit(rows: list[dict], fmt: str, out: Path | None) -> None:
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        if fmt == "json":
            json.dump(rows, fh, indent=1, default=str)
            fh.write("\n")
        elif rows:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    finally:
        if out:
            fh.close()


def _load_collection(path: Path):
    collection = read_collection(path)
    problems = validate(collection)
    if problems:
        raise InvalidInput("invalid collection: " + "; ".join(str(p) for p in problems[:5]))
    return collection


def cmd_generate(args) -> int:
    if args.bench:
        spec = bench_spec(args.seed)
    else:
        attrs = traceroute_attrs() if args.attrs == "traceroute" else GenSpec(1).attrs
        spec = GenSpec(
            args.vertices,
            args.topology,
            args.edges,
            args.degree,
            args.rewire,
            args.components,
            args.directed,
            args.instances,
            args.duration,
            attrs=attrs,
            exists_flip=args.exists_flip,
            seed=args.seed,
        )
    collection = generate(spec)
    write_collection(collection, args.out)
    print(f"wrote {collection.template.n_vertices} vertices, {collection.template.n_edges} edges, "
          f"{len(collection.instances)} instances to {args.out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    collection, out = ingest(args.source, args.out)
    problems = validate(collection)
    if problems:
        raise InvalidInput("invalid collection: " + "; ".join(str(p) for p in problems[:5]))
    print(f"ingested {collection.template.n_vertices} vertices into {out}")
    return EXIT_OK


def cmd_deploy(args) -> int:
    collection = _load_collection(args.collection)
    layout = LayoutConfig(args.bins, args.ipack, BalanceMetric(args.balance))
    manifest = deploy(collection, args.hosts, layout, _root(args), seed=args.seed)
    rows = [
        {
            "host": h["host"],
            "subgraphs": h["n_subgraphs"],
            "bins": h["n_bins"],
            "template_slices": h["slice_counts"]["template"],
            "metadata_slices": h["slice_counts"]["metadata"],
            "attribute_slices": h["slice_counts"]["attribute"],
            "bytes": h["bytes"],
        }
        for h in manifest.data["hosts"]
    ]
    _emit(rows, args.format, None)
    return EXIT_OK


def _result_rows(name, app, result) -> list[dict]:
    if name == "sssp":
        dist = apps.sssp.distances(result)
        return [{"vertex": v, "distance": dist[v]} for v in sorted(dist)]
    if name == "nhop":
        counts = apps.nhop.composite(result)
        edges = apps.nhop.bucket_edges()
        return [{"bucket": k, "low": edges[k], "high": edges[k + 1], "count": int(c)} for k, c in enumerate(counts)]
    if name == "pagerank":
        return [
            {"timestep": t, "vertex": v, "rank": r}
            for t in sorted(result.outputs)
            for v, r in sorted(apps.pagerank.ranks(result, t).items())
        ]
    return [{"timestep": t, "vertex": v, "timestamp": ts} for t, v, ts in apps.track.track(result)]


def cmd_run(args) -> int:
    if args.app not in apps.APPS:
        raise UsageError(f"unknown app {args.app!r}; choose from {', '.join(apps.APPS)}")
    deployment = Deployment(_root(args))
    try:
        app, inputs = apps.build(
            args.app,
            deployment,
            source=args.source,
            n_hops=args.n_hops,
            target_id=args.target_id,
            initial_location=args.source,
            search_depth=args.search_depth,
            pr_iters=args.pr_iters,
            temporal=args.temporal,
        )
    except UnknownVertexError as exc:
        raise InvalidInput(str(exc)) from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    config = RunConfig(
        workers_per_host=args.workers,
        cache_slots=args.cache_slots,
        time_range=tuple(args.time_range) if args.time_range else None,
        inputs=inputs,
    )
    result, stats = run(app, deployment, args.pattern, config)
    _emit(_result_rows(args.app, app, result), args.format, args.out)
    if args.stats:
        with open(args.stats, "w", newline="", encoding="utf-8") as fh:
            stats.to_csv(fh)
    if stats.dropped_messages:
        log.warning("%d message(s) sent past the last timestep were dropped", stats.dropped_messages)
    return EXIT_OK


def cmd_bench_scan(args) -> int:
    collection = _load_collection(args.collection) if args.collection else generate(bench_spec(args.seed))
    result = sweep(collection, _root(args), args.hosts, args.bins, args.ipack, args.caches, args.order, args.seed)
    if args.rows_dir:
        args.rows_dir.mkdir(parents=True, exist_ok=True)
        for (s, i, c), rep in result.reports.items():
            name = deployment_path("", s, i).name
            with open(args.rows_dir / f"{name}-c{c}.csv", "w", newline="", encoding="utf-8") as fh:
                rep.to_csv(fh)
    _emit(result.rows(), args.format, args.out)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "deploy": cmd_deploy,
    "run": cmd_run,
    "bench-scan": cmd_bench_scan,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"tsgraph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInput, InfeasibleSpecError, FormatError) as exc:
        print(f"tsgraph: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TSGraphError, OSError, ValueError) as exc:
        print(f"tsgraph: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
