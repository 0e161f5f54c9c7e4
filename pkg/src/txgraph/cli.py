"""Batch command-line interface.

Exit codes: 0 success, 1 input error, 2 runtime/budget error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import explorer, fitting, graphs, ingest, pipeline
from .errors import InputError, TxGraphError


def _add_genesis(parser: argparse.ArgumentParser, required: bool = False) -> None:
    parser.add_argument(
        "--genesis-month",
        type=ingest.YearMonth.parse,
        required=required,
        help="first calendar month, YYYY-MM (default: month of the earliest record)",
    )


def _load_records(args) -> list[ingest.TxRecord]:
    skip_log: list = []
    records = ingest.read_records(args.records, lenient=args.lenient, skip_log=skip_log)
    if skip_log:
        print(f"skipped {len(skip_log)} malformed lines", file=sys.stderr)
    return records


def _cmd_ingest(args) -> int:
    records = _load_records(args)
    if args.out:
        out = Path(args.out)
        if args.format:
            out = out.with_suffix("." + args.format)
        ingest.write_records(records, out)
    if args.manifest:
        genesis = args.genesis_month or (
            ingest.YearMonth.from_timestamp(min(r.ts for r in records)) if records else None
        )
        manifest = ingest.DatasetManifest(
            coin_name=args.coin, genesis_month=genesis,
            record_count=len(records), source="file",
        )
        Path(args.manifest).write_text(manifest.to_json() + "\n", encoding="utf-8")
    print(f"{len(records)} records ok")
    return 0


def _cmd_fetch(args) -> int:
    config = explorer.ExplorerConfig(
        base_url=args.base_url,
        coin_code=args.coin,
        requests_per_second=args.rps,
        max_retries=args.max_retries,
        timeout=args.timeout,
    )
    client = explorer.ExplorerClient(config)
    diagnostics = explorer.NormalizeDiagnostics()
    with open(args.out, "a", encoding="utf-8", newline="") as fh:
        def sink(record: ingest.TxRecord) -> None:
            ingest.write_jsonl([record], fh)

        manifest = client.fetch_range(
            args.from_height,
            args.to_height,
            sink,
            checkpoint_path=args.checkpoint,
            diagnostics=diagnostics,
        )
    if args.manifest:
        Path(args.manifest).write_text(manifest.to_json() + "\n", encoding="utf-8")
    print(
        f"fetched {manifest.record_count} records "
        f"(opaque inputs {diagnostics.opaque_inputs}, outputs {diagnostics.opaque_outputs})"
    )
    return 0


def _cmd_build(args) -> int:
    records = _load_records(args)
    if not records:
        raise InputError("no records")
    genesis = args.genesis_month or ingest.YearMonth.from_timestamp(
        min(r.ts for r in records)
    )
    buckets = ingest.bucket_by_month(records, genesis)
    table = graphs.AddressTable()
    mtgs = [graphs.build_mtg(buckets[m], m, table) for m in sorted(buckets)]
    graphs.save_snapshot(args.out, table, mtgs, genesis=genesis, coin=args.coin)
    total_edges = sum(g.n_undirected for g in mtgs)
    print(f"snapshot: {len(mtgs)} months, {len(table)} addresses, {total_edges} edges")
    return 0


def _run_config_from_args(args) -> pipeline.RunConfig:
    return pipeline.RunConfig(
        records_path=Path(args.records) if args.records else None,
        price_path=Path(args.price) if args.price else None,
        out_dir=Path(args.out),
        snapshot_path=Path(args.snapshot) if args.snapshot else None,
        coin_name=args.coin,
        genesis_month=args.genesis_month,
        seed=args.seed,
        node_cap=args.clique_cap,
        clustering_samples=args.samples,
        clique_steps=args.clique_steps,
        x_min=args.x_min,
        x_min_policy="scan" if args.scan_x_min else "fixed",
        anomaly_window=args.anomaly_window,
        anomaly_threshold=args.anomaly_threshold,
        lenient=args.lenient,
    )


def _cmd_run(args) -> int:
    config = _run_config_from_args(args)
    report = pipeline.run_pipeline(config)
    written = pipeline.write_report(report, config.out_dir)
    for path in written:
        print(path)
    return 0


def _cmd_sample_edges(args) -> int:
    if args.snapshot:
        table, mtgs, _ = graphs.load_snapshot(args.snapshot)
    else:
        if not args.records:
            raise InputError("need --records or --snapshot")
        records = _load_records(args)
        if not records:
            raise InputError("no records")
        genesis = args.genesis_month or ingest.YearMonth.from_timestamp(
            min(r.ts for r in records)
        )
        buckets = ingest.bucket_by_month(records, genesis)
        table = graphs.AddressTable()
        mtgs = [graphs.build_mtg(buckets[m], m, table) for m in sorted(buckets)]
    if args.cumulative:
        graph = graphs.CumulativeGraph.empty()
        for mtg in mtgs:
            graph = graphs.accumulate_cmtg(graph, mtg)
            if args.month is not None and mtg.month == args.month:
                break
    else:
        if args.month is None:
            raise InputError("need --month for a monthly sample (or use --cumulative)")
        matches = [g for g in mtgs if g.month == args.month]
        if not matches:
            raise InputError(f"no month {args.month} in the dataset")
        graph = matches[0]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        n = graphs.write_edge_sample_csv(graph, table, args.k, args.seed, fh)
    print(f"wrote {n} edges to {args.out}")
    return 0


def _read_degree_file(path: str) -> list[int]:
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.lower() in ("degree", "degrees"):
                continue
            values.append(int(line))
    return values


def _cmd_fit(args) -> int:
    if args.kind == "power-law":
        degrees = _read_degree_file(args.infile)
        if args.scan:
            fit = fitting.scan_power_law(degrees)
        else:
            fit = fitting.fit_power_law(degrees, args.x_min)
        print(
            json.dumps(
                {
                    "alpha": fit.alpha,
                    "x_min": fit.x_min,
                    "n_tail": fit.n_tail,
                    "log_likelihood": fit.log_likelihood,
                    "ks_distance": fit.ks_distance,
                },
                sort_keys=True,
            )
        )
    else:
        points = []
        with open(args.infile, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "nodes,edges":
                raise InputError(f"expected header nodes,edges, got {header!r}")
            for line in fh:
                line = line.strip()
                if line:
                    v, e = line.split(",")
                    points.append((float(v), float(e)))
        fit = fitting.fit_power_model(points)
        print(
            json.dumps(
                {
                    "a": fit.a,
                    "b": fit.b,
                    "adjusted_r2": fit.adjusted_r2,
                    "n_points": fit.n_points,
                },
                sort_keys=True,
            )
        )
    return 0


def _cmd_correlate(args) -> int:
    price = fitting.PriceSeries.load(args.price)
    series: dict[ingest.YearMonth, float] = {}
    with open(args.metrics, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if args.column not in header:
            raise InputError(f"column {args.column!r} not in {header}")
        month_col = header.index("month")
        value_col = header.index(args.column)
        for line in fh:
            cells = line.rstrip("\n").split(",")
            if cells[value_col] == "":
                continue
            ym = args.genesis_month.add(int(cells[month_col]))
            series[ym] = float(cells[value_col])
    aligned = fitting.align_with_price(series, price)
    r = fitting.pearson(aligned.metric, aligned.price)
    print(json.dumps({"r": r, "months": len(aligned.months), "dropped": aligned.dropped}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="txgraph",
        description="Monthly cryptocurrency transaction-graph analytics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and convert record files")
    p.add_argument("--records", required=True, help="input records (.jsonl or .csv)")
    p.add_argument("--out", help="optional converted copy")
    p.add_argument("--format", choices=["csv", "jsonl"], help="force output format")
    p.add_argument("--manifest", help="write a dataset manifest here")
    p.add_argument("--coin", default="coin")
    p.add_argument("--lenient", action="store_true", help="skip malformed lines")
    _add_genesis(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("fetch", help="fetch a block range from an explorer API")
    p.add_argument("--base-url", required=True)
    p.add_argument("--coin", required=True)
    p.add_argument("--from", dest="from_height", type=int, required=True)
    p.add_argument("--to", dest="to_height", type=int, required=True)
    p.add_argument("--out", required=True, help="JSONL records file (appended)")
    p.add_argument("--checkpoint", help="resume checkpoint file")
    p.add_argument("--manifest", help="write a dataset manifest here")
    p.add_argument("--rps", type=float, default=2.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=_cmd_fetch)

    p = sub.add_parser("build", help="build and cache graph snapshots")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True, help="snapshot file (.npz)")
    p.add_argument("--coin", default="coin")
    p.add_argument("--lenient", action="store_true")
    _add_genesis(p)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("run", help="run the full monthly pipeline")
    p.add_argument("--records", help="records file (.jsonl or .csv)")
    p.add_argument("--snapshot", help="graph snapshot to reuse or create")
    p.add_argument("--price", help="monthly price CSV (month,price)")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--coin", default="coin")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clique-cap", type=int, default=1_000_000,
                   help="node cap gating clustering/clique/assortativity")
    p.add_argument("--clique-steps", type=int, default=1_000_000)
    p.add_argument("--samples", type=int, help="triad samples per month")
    p.add_argument("--x-min", type=int, default=1)
    p.add_argument("--scan-x-min", action="store_true")
    p.add_argument("--anomaly-window", type=int, default=2)
    p.add_argument("--anomaly-threshold", type=float, default=5.0)
    p.add_argument("--lenient", action="store_true")
    _add_genesis(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sample-edges", help="export a uniform edge sample as CSV")
    p.add_argument("--records")
    p.add_argument("--snapshot")
    p.add_argument("--month", type=int)
    p.add_argument("--cumulative", action="store_true")
    p.add_argument("--k", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--lenient", action="store_true")
    _add_genesis(p)
    p.set_defaults(func=_cmd_sample_edges)

    p = sub.add_parser("fit", help="standalone fitters on CSV inputs")
    p.add_argument("kind", choices=["power-law", "power-model"])
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--x-min", type=int, default=1)
    p.add_argument("--scan", action="store_true")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("correlate", help="correlate a report column with prices")
    p.add_argument("--metrics", required=True, help="monthly.csv from a run")
    p.add_argument("--column", required=True)
    p.add_argument("--price", required=True)
    _add_genesis(p, required=True)
    p.set_defaults(func=_cmd_correlate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TxGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
