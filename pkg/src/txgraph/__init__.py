"""Monthly and cumulative cryptocurrency transaction-graph analytics."""

from .errors import (
    CapExceededError,
    InputError,
    ParseError,
    RecordError,
    TxGraphError,
    UndefinedMetricError,
)
from .ingest import (
    SUPERNODE_TOKEN,
    DatasetManifest,
    TxRecord,
    YearMonth,
    bucket_by_month,
    month_index,
    parse_csv,
    parse_jsonl,
    write_csv,
    write_jsonl,
)
from .graphs import (
    SUPERNODE_ID,
    AddressTable,
    CumulativeGraph,
    MonthlyGraph,
    TxGraph,
    accumulate_cmtg,
    build_mtg,
    degree_sequence,
    edges_of_transaction,
    sample_edges,
)
from .metrics import (
    CliqueResult,
    ClusteringEstimate,
    assortativity,
    clustering_exact,
    clustering_sampled,
    density,
    edge_vertex_ratio,
    max_clique,
    repetition_ratio_edges,
    repetition_ratio_nodes,
)
from .fitting import (
    GrowthRate,
    PowerLawFit,
    PowerModelFit,
    PriceSeries,
    adjusted_r2,
    align_with_price,
    fit_power_law,
    fit_power_model,
    pearson,
    rgr,
    scan_power_law,
)
from .pipeline import MetricRow, Report, RunConfig, detect_anomalies, run_pipeline, write_report

__version__ = "0.1.0"
