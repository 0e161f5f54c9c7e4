"""Seeded synthetic data: power-law samples, transaction record streams,
and the dense hub-month pattern used for anomaly testing.

Everything here is a pure function of its seed so fixtures and benchmarks
are reproducible.
"""

from __future__ import annotations

import calendar
from datetime import datetime, timezone

import numpy as np

from .graphs import TxGraph, encode_pair
from .ingest import TxRecord, YearMonth


def sample_power_law(
    alpha: float, x_min: int, size: int, seed: int | np.random.Generator
) -> np.ndarray:
    """Integer draws from the discrete power law P(k) ~ k^(-alpha), k >= x_min.

    Inverse-CDF over a table of the first 100k support points; the far tail
    (total mass below ~1e-8 for alpha > 2) falls back to rounding the
    continuous inverse CDF.
    """
    if alpha <= 1.0:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    if x_min < 1:
        raise ValueError(f"x_min must be >= 1, got {x_min}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ks = np.arange(x_min, x_min + 100_000, dtype=np.float64)
    pmf = ks ** (-alpha)
    cdf = np.cumsum(pmf)
    # Normalize against the full mass: table mass + continuous tail estimate.
    tail_mass = (ks[-1] + 0.5) ** (1.0 - alpha) / (alpha - 1.0)
    total = cdf[-1] + tail_mass
    u = rng.random(size) * total
    idx = np.searchsorted(cdf, u, side="right")
    out = (x_min + idx).astype(np.int64)
    overflow = idx >= len(ks)
    if np.any(overflow):
        # Invert the continuous tail beyond the table.
        rest = (total - u[overflow]) * (alpha - 1.0)
        out[overflow] = np.floor(rest ** (1.0 / (1.0 - alpha)) + 0.5).astype(np.int64)
    return out


def gnp_graph(n: int, p: float, seed: int) -> TxGraph:
    """Seeded Erdos-Renyi G(n, p) as an undirected TxGraph on ids 1..n."""
    rng = np.random.default_rng(seed)
    nodes = set(range(1, n + 1))
    undirected: set[int] = set()
    iu, iv = np.triu_indices(n, k=1)
    mask = rng.random(len(iu)) < p
    for u, v in zip(iu[mask] + 1, iv[mask] + 1):
        undirected.add(encode_pair(int(u), int(v)))
    return TxGraph(nodes=nodes, directed=set(undirected), undirected=set(undirected))


def _month_timestamps(ym: YearMonth, count: int, rng: np.random.Generator) -> np.ndarray:
    start = int(datetime(ym.year, ym.month, 1, tzinfo=timezone.utc).timestamp())
    length = calendar.monthrange(ym.year, ym.month)[1] * 86400
    ts = start + rng.integers(0, length, size=count)
    return np.sort(ts)


def synthetic_records(
    months: int,
    tx_per_month: int,
    seed: int,
    *,
    genesis: YearMonth = YearMonth(2011, 1),
    new_address_prob: float = 0.45,
    coinbase_every: int = 50,
) -> list[TxRecord]:
    """A scale-free-ish stream of transactions spread over calendar months.

    Input addresses are drawn preferentially from recent activity (a
    growing pool sampled with recency bias), outputs mix fresh and reused
    addresses, and every ``coinbase_every``-th transaction is a coinbase
    paying a miner.  Degree tails come out heavy without tuning.
    """
    rng = np.random.default_rng(seed)
    records: list[TxRecord] = []
    pool: list[str] = [f"a{n}" for n in range(8)]
    next_addr = len(pool)

    for m in range(months):
        ym = genesis.add(m)
        stamps = _month_timestamps(ym, tx_per_month, rng).tolist()
        n_inputs = rng.integers(1, 4, size=tx_per_month).tolist()
        n_outputs = rng.integers(1, 3, size=tx_per_month).tolist()
        fresh_draws = (rng.random(tx_per_month) < new_address_prob).tolist()
        # recency-biased pool positions: squared uniform leans recent;
        # one fraction per potential draw (<=3 inputs + <=2 outputs)
        bias = 1.0 - rng.random((tx_per_month, 5)) ** 2.0
        for i in range(tx_per_month):
            ts = stamps[i]
            if i % coinbase_every == 0:
                name = f"a{next_addr}"
                next_addr += 1
                pool.append(name)
                records.append(TxRecord(ts=ts, inputs=(), outputs=(name,), coinbase=True))
                continue
            size = len(pool)
            row = bias[i]
            inputs = {pool[min(int(size * row[k]), size - 1)] for k in range(n_inputs[i])}
            outputs = []
            for k in range(n_outputs[i]):
                if fresh_draws[i]:
                    name = f"a{next_addr}"
                    next_addr += 1
                    pool.append(name)
                    outputs.append(name)
                else:
                    size = len(pool)
                    outputs.append(pool[min(int(size * row[3 + k]), size - 1)])
            # outputs may duplicate inputs; the graph layer handles self-pairs
            dedup = tuple(dict.fromkeys(outputs))
            records.append(TxRecord(ts=ts, inputs=tuple(sorted(inputs)), outputs=dedup))
    return records


def hub_month_records(
    ym: YearMonth,
    seed: int,
    *,
    n_hub_addresses: int = 100,
    n_tx: int = 100,
    inputs_per_tx: int = 20,
    outputs_per_tx: int = 10,
    prefix: str = "hub",
) -> list[TxRecord]:
    """Transactions reproducing the many-hub blowup pattern.

    Each transaction draws its inputs from a small reused pool and pays
    fresh leaf outputs, so the input addresses become similar-size hubs and
    the cross product inflates the edge count far beyond the node count.
    """
    rng = np.random.default_rng(seed)
    hubs = [f"{prefix}_h{i}" for i in range(n_hub_addresses)]
    stamps = _month_timestamps(ym, n_tx, rng)
    records = []
    leaf = 0
    for i in range(n_tx):
        chosen = rng.choice(n_hub_addresses, size=inputs_per_tx, replace=False)
        inputs = tuple(hubs[int(c)] for c in np.sort(chosen))
        outputs = tuple(f"{prefix}_l{leaf + j}" for j in range(outputs_per_tx))
        leaf += outputs_per_tx
        records.append(TxRecord(ts=int(stamps[i]), inputs=inputs, outputs=outputs))
    return records
