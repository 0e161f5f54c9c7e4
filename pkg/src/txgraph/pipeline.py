"""End-to-end monthly run: ingest -> bucket -> build graphs -> metrics ->
fits -> stable CSV/JSON reports and plot-data files.

Reports are deterministic for a fixed config: per-month sampling seeds are
derived from the config seed, the clique search runs on a step budget, and
all writers emit fixed column orders with stable float formatting, so
re-running the same config reproduces byte-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median
from typing import Iterable, Sequence

from . import fitting, metrics
from .errors import InputError, TxGraphError, UndefinedMetricError
from .fitting import GrowthRate, PowerLawFit, PowerModelFit, PriceSeries
from .graphs import (
    AddressTable,
    CumulativeGraph,
    MonthlyGraph,
    accumulate_cmtg,
    build_mtg,
    degree_sequence,
    load_snapshot,
    save_snapshot,
)
from .ingest import TxRecord, YearMonth, bucket_by_month, read_records
from .metrics import CliqueResult, ClusteringEstimate

MONTHLY_COLUMNS = [
    "month",
    "mtg_nodes",
    "mtg_edges",
    "cmtg_nodes",
    "cmtg_edges",
    "mtg_density",
    "cmtg_density",
    "ev_mtg",
    "ev_cmtg",
    "rr_nodes",
    "rr_edges",
    "assortativity",
    "clustering",
    "clustering_samples",
    "max_clique",
    "clique_exact",
    "alpha_undirected",
    "alpha_in",
    "alpha_out",
    "alpha_total",
]

ALPHA_VARIANTS = ("undirected", "in", "out", "total")


@dataclass
class RunConfig:
    records_path: Path | None = None
    price_path: Path | None = None
    out_dir: Path | None = None
    snapshot_path: Path | None = None
    coin_name: str = "coin"
    genesis_month: YearMonth | None = None  # None: month of the earliest record
    seed: int = 0
    # Node-count gate for the expensive cumulative-graph metrics
    # (clustering, max clique, assortativity).
    node_cap: int = 1_000_000
    clustering_samples: int | None = None  # None: min(1e6, 100 * nodes)
    clique_steps: int = 1_000_000
    x_min: int = 1
    x_min_policy: str = "fixed"  # "fixed" or "scan"
    enable_clustering: bool = True
    enable_clique: bool = True
    enable_assortativity: bool = True
    enable_alphas: bool = True
    anomaly_window: int = 2
    anomaly_threshold: float = 5.0
    lenient: bool = False


@dataclass
class MetricRow:
    month: int
    mtg_nodes: int
    mtg_edges: int
    cmtg_nodes: int
    cmtg_edges: int
    mtg_density: float | None = None
    cmtg_density: float | None = None
    ev_mtg: float | None = None
    ev_cmtg: float | None = None
    rr_nodes: float | None = None
    rr_edges: float | None = None
    assortativity: float | None = None
    clustering: ClusteringEstimate | None = None
    max_clique: CliqueResult | None = None
    alpha_undirected: PowerLawFit | None = None
    alpha_in: PowerLawFit | None = None
    alpha_out: PowerLawFit | None = None
    alpha_total: PowerLawFit | None = None


@dataclass
class Report:
    coin_name: str
    genesis_month: YearMonth
    rows: list[MetricRow]
    rgr_nodes: GrowthRate | None = None
    rgr_edges: GrowthRate | None = None
    power_model: PowerModelFit | None = None
    correlations: dict[str, float] | None = None
    price_months_used: int | None = None
    price_months_dropped: int | None = None
    anomalies: list[int] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _maybe(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except UndefinedMetricError:
        return None


def _fit_alpha(graph, variant: str, config: RunConfig) -> PowerLawFit | None:
    degrees = degree_sequence(graph, variant)
    degrees = degrees[degrees > 0]
    if len(degrees) < 2:
        return None
    try:
        if config.x_min_policy == "scan":
            return fitting.scan_power_law(degrees)
        return fitting.fit_power_law(degrees, config.x_min)
    except UndefinedMetricError:
        return None


def _build_monthly_graphs(
    records: Sequence[TxRecord], genesis: YearMonth
) -> tuple[AddressTable, list[MonthlyGraph]]:
    buckets = bucket_by_month(records, genesis)
    table = AddressTable()
    return table, [build_mtg(buckets[m], m, table) for m in sorted(buckets)]


def run_pipeline(config: RunConfig, records: Sequence[TxRecord] | None = None) -> Report:
    """Execute the full monthly pipeline and return the assembled report.

    Graphs come from ``records`` (given directly or read from
    ``config.records_path``) or from a previously saved snapshot at
    ``config.snapshot_path``, which short-circuits building and makes
    reruns byte-identical.
    """
    table: AddressTable
    mtgs: list[MonthlyGraph]
    if config.snapshot_path is not None and Path(config.snapshot_path).exists():
        table, mtgs, meta = load_snapshot(config.snapshot_path)
        genesis = YearMonth.parse(meta["genesis_month"])
    else:
        if records is None:
            if config.records_path is None:
                raise InputError("no records: provide records, records_path, or a snapshot")
            records = read_records(config.records_path, lenient=config.lenient)
        if not records:
            raise InputError("no records")
        genesis = config.genesis_month or YearMonth.from_timestamp(
            min(rec.ts for rec in records)
        )
        table, mtgs = _build_monthly_graphs(records, genesis)
        if config.snapshot_path is not None:
            save_snapshot(
                config.snapshot_path, table, mtgs, genesis=genesis, coin=config.coin_name
            )

    rows: list[MetricRow] = []
    cmtg = CumulativeGraph.empty()
    prev_mtg: MonthlyGraph | None = None
    for mtg in mtgs:
        cmtg = accumulate_cmtg(cmtg, mtg)
        row = MetricRow(
            month=mtg.month,
            mtg_nodes=mtg.n_nodes,
            mtg_edges=mtg.n_undirected,
            cmtg_nodes=cmtg.n_nodes,
            cmtg_edges=cmtg.n_undirected,
            mtg_density=_maybe(metrics.density, mtg.n_nodes, mtg.n_undirected),
            cmtg_density=_maybe(metrics.density, cmtg.n_nodes, cmtg.n_undirected),
            ev_mtg=_maybe(metrics.edge_vertex_ratio, mtg.n_nodes, mtg.n_undirected),
            ev_cmtg=_maybe(metrics.edge_vertex_ratio, cmtg.n_nodes, cmtg.n_undirected),
        )
        if prev_mtg is not None:
            row.rr_nodes = _maybe(metrics.repetition_ratio_nodes, mtg, prev_mtg)
            row.rr_edges = _maybe(metrics.repetition_ratio_edges, mtg, prev_mtg)
        if cmtg.n_nodes <= config.node_cap:
            if config.enable_assortativity:
                row.assortativity = _maybe(metrics.assortativity, cmtg)
            if config.enable_clustering:
                samples = config.clustering_samples or min(1_000_000, 100 * cmtg.n_nodes)
                if samples > 0:
                    row.clustering = _maybe(
                        metrics.clustering_sampled, cmtg, samples, config.seed + mtg.month
                    )
            if config.enable_clique:
                row.max_clique = metrics.max_clique(
                    cmtg, max_steps=config.clique_steps, time_limit=None
                )
        if config.enable_alphas:
            row.alpha_undirected = _fit_alpha(cmtg, "undirected", config)
            row.alpha_in = _fit_alpha(cmtg, "in", config)
            row.alpha_out = _fit_alpha(cmtg, "out", config)
            row.alpha_total = _fit_alpha(cmtg, "total", config)
        rows.append(row)
        prev_mtg = mtg

    report = Report(coin_name=config.coin_name, genesis_month=genesis, rows=rows)
    _summarize(report, config)
    return report


def _summarize(report: Report, config: RunConfig) -> None:
    rows = report.rows
    last = rows[-1]
    if last.month > 0:
        try:
            report.rgr_nodes = fitting.rgr(rows[0].cmtg_nodes, 0, last.cmtg_nodes, last.month)
            report.rgr_edges = fitting.rgr(rows[0].cmtg_edges, 0, last.cmtg_edges, last.month)
        except InputError:
            report.notes.append("rgr omitted: degenerate sizes")
    else:
        report.notes.append("rgr omitted: single month")

    points = [
        (row.cmtg_nodes, row.cmtg_edges)
        for row in rows
        if row.cmtg_nodes >= 2 and row.cmtg_edges >= 1
    ]
    if len(points) >= 3:
        try:
            report.power_model = fitting.fit_power_model(points)
        except (InputError, UndefinedMetricError) as exc:
            report.notes.append(f"power model omitted: {exc}")
    else:
        report.notes.append("power model omitted: fewer than 3 usable months")

    if config.price_path is not None:
        price = PriceSeries.load(config.price_path)
        series = {
            "price_vs_mtg_nodes": {
                report.genesis_month.add(r.month): float(r.mtg_nodes) for r in rows
            },
            "price_vs_mtg_edges": {
                report.genesis_month.add(r.month): float(r.mtg_edges) for r in rows
            },
            "price_vs_mtg_density": {
                report.genesis_month.add(r.month): r.mtg_density
                for r in rows
                if r.mtg_density is not None
            },
        }
        correlations: dict[str, float] = {}
        used = dropped = None
        for name, values in series.items():
            try:
                aligned = fitting.align_with_price(values, price)
                correlations[name] = fitting.pearson(aligned.metric, aligned.price)
                if name == "price_vs_mtg_nodes":
                    used, dropped = len(aligned.months), aligned.dropped
            except UndefinedMetricError as exc:
                report.notes.append(f"{name} omitted: {exc}")
        report.correlations = correlations or None
        report.price_months_used = used
        report.price_months_dropped = dropped
    else:
        report.notes.append("price: absent")

    if len(rows) >= config.anomaly_window + 1:
        report.anomalies = detect_anomalies(
            report, window=config.anomaly_window, threshold=config.anomaly_threshold
        )


def detect_anomalies(
    report: Report | Sequence[MetricRow], window: int = 2, threshold: float = 5.0
) -> list[int]:
    """Months whose MTG edge-to-vertex ratio spikes above its neighborhood.

    Month m is flagged when its ratio exceeds ``threshold`` times the median
    ratio of the surrounding months within ``window`` (m excluded).  Months
    with an undefined ratio are skipped and do not enter medians.
    """
    rows = report.rows if isinstance(report, Report) else list(report)
    if window < 1:
        raise InputError(f"window must be >= 1, got {window}")
    if len(rows) < window + 1:
        raise InputError(f"need at least {window + 1} months, got {len(rows)}")
    ratios = [row.ev_mtg for row in rows]
    flagged = []
    for m, value in enumerate(ratios):
        if value is None:
            continue
        neighborhood = [
            ratios[j]
            for j in range(max(0, m - window), min(len(ratios), m + window + 1))
            if j != m and ratios[j] is not None
        ]
        if not neighborhood:
            continue
        if value > threshold * median(neighborhood):
            flagged.append(m)
    return flagged


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _row_cells(row: MetricRow) -> list[str]:
    clique = row.max_clique
    return [
        _fmt(row.month),
        _fmt(row.mtg_nodes),
        _fmt(row.mtg_edges),
        _fmt(row.cmtg_nodes),
        _fmt(row.cmtg_edges),
        _fmt(row.mtg_density),
        _fmt(row.cmtg_density),
        _fmt(row.ev_mtg),
        _fmt(row.ev_cmtg),
        _fmt(row.rr_nodes),
        _fmt(row.rr_edges),
        _fmt(row.assortativity),
        _fmt(row.clustering.value if row.clustering else None),
        _fmt(row.clustering.samples if row.clustering else None),
        _fmt(clique.size if clique else None),
        _fmt(clique.exact if clique else None),
        _fmt(row.alpha_undirected.alpha if row.alpha_undirected else None),
        _fmt(row.alpha_in.alpha if row.alpha_in else None),
        _fmt(row.alpha_out.alpha if row.alpha_out else None),
        _fmt(row.alpha_total.alpha if row.alpha_total else None),
    ]


def _growth_json(g: GrowthRate | None):
    if g is None:
        return None
    return {"rgr": g.rgr, "t1": g.t1, "t2": g.t2, "s1": g.s1, "s2": g.s2}


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for cells in rows:
            fh.write(",".join(cells) + "\n")


def write_report(report: Report, out_dir: str | Path) -> list[Path]:
    """Write monthly.csv, summary.json, and the plot-data CSV family.

    Output is byte-stable: fixed column orders, sorted JSON keys, and
    shortest-stable float formatting.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plot = out / "plotdata"
    plot.mkdir(exist_ok=True)
    written: list[Path] = []

    monthly = out / "monthly.csv"
    _write_csv(monthly, MONTHLY_COLUMNS, (_row_cells(r) for r in report.rows))
    written.append(monthly)

    summary = {
        "coin_name": report.coin_name,
        "genesis_month": str(report.genesis_month),
        "months": len(report.rows),
        "rgr": {
            "nodes": _growth_json(report.rgr_nodes),
            "edges": _growth_json(report.rgr_edges),
        },
        "power_model": None
        if report.power_model is None
        else {
            "a": report.power_model.a,
            "b": report.power_model.b,
            "adjusted_r2": report.power_model.adjusted_r2,
            "n_points": report.power_model.n_points,
        },
        "price": "present" if report.correlations is not None else "absent",
        "correlations": report.correlations,
        "price_months_used": report.price_months_used,
        "price_months_dropped": report.price_months_dropped,
        "anomalous_months": report.anomalies,
        "notes": report.notes,
    }
    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append(summary_path)

    def emit(name: str, header: list[str], cells_of) -> None:
        path = plot / name
        _write_csv(path, header, (cells_of(r) for r in report.rows))
        written.append(path)

    emit(
        "sizes.csv",
        ["month", "mtg_nodes", "mtg_edges", "cmtg_nodes", "cmtg_edges"],
        lambda r: [
            _fmt(r.month),
            _fmt(r.mtg_nodes),
            _fmt(r.mtg_edges),
            _fmt(r.cmtg_nodes),
            _fmt(r.cmtg_edges),
        ],
    )
    emit(
        "densities.csv",
        ["month", "mtg_density", "cmtg_density"],
        lambda r: [_fmt(r.month), _fmt(r.mtg_density), _fmt(r.cmtg_density)],
    )
    emit(
        "ratios.csv",
        ["month", "ev_mtg", "ev_cmtg"],
        lambda r: [_fmt(r.month), _fmt(r.ev_mtg), _fmt(r.ev_cmtg)],
    )
    emit(
        "rr.csv",
        ["month", "rr_nodes", "rr_edges"],
        lambda r: [_fmt(r.month), _fmt(r.rr_nodes), _fmt(r.rr_edges)],
    )
    emit(
        "assortativity.csv",
        ["month", "assortativity"],
        lambda r: [_fmt(r.month), _fmt(r.assortativity)],
    )
    emit(
        "alphas.csv",
        ["month", "alpha_undirected", "alpha_in", "alpha_out", "alpha_total"],
        lambda r: [
            _fmt(r.month),
            _fmt(r.alpha_undirected.alpha if r.alpha_undirected else None),
            _fmt(r.alpha_in.alpha if r.alpha_in else None),
            _fmt(r.alpha_out.alpha if r.alpha_out else None),
            _fmt(r.alpha_total.alpha if r.alpha_total else None),
        ],
    )
    emit(
        "clustering_vs_nodes.csv",
        ["cmtg_nodes", "clustering"],
        lambda r: [_fmt(r.cmtg_nodes), _fmt(r.clustering.value if r.clustering else None)],
    )
    emit(
        "clique_vs_nodes.csv",
        ["cmtg_nodes", "max_clique"],
        lambda r: [_fmt(r.cmtg_nodes), _fmt(r.max_clique.size if r.max_clique else None)],
    )
    return written
