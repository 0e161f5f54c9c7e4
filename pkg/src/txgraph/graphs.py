"""Monthly and cumulative transaction graphs over interned addresses.

A transaction with distinct input addresses I and distinct output addresses O
contributes the ordered pairs {(i, o) : i in I, o in O}; a coinbase
transaction sources its pairs from a single reserved supernode (id 0).
Pairs with i == o are dropped from both edge stores and counted in a
per-month self-transfer tally so the undirected graph stays simple.

Nodes are dense integer ids.  Edges are stored as encoded 64-bit pair codes
(src in the high 32 bits) inside plain sets, which keeps million-edge months
workable; metric code gets sorted numpy views and a CSR adjacency on demand.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import InputError
from .ingest import SUPERNODE_TOKEN, TxRecord, YearMonth

SUPERNODE_ID = 0

_SHIFT = 32
_MASK = (1 << _SHIFT) - 1

DEGREE_VARIANTS = ("undirected", "in", "out", "total")


def encode_pair(u: int, v: int) -> int:
    return (u << _SHIFT) | v


def decode_pair(code: int) -> tuple[int, int]:
    return code >> _SHIFT, code & _MASK


class AddressTable:
    """Bidirectional address <-> dense id map; id 0 is the coinbase supernode."""

    def __init__(self):
        self._ids: dict[str, int] = {SUPERNODE_TOKEN: SUPERNODE_ID}
        self._addrs: list[str] = [SUPERNODE_TOKEN]

    def intern(self, addr: str) -> int:
        if SUPERNODE_TOKEN in addr:
            raise InputError(f"cannot intern the reserved token: {addr!r}")
        idx = self._ids.get(addr)
        if idx is None:
            idx = len(self._addrs)
            self._ids[addr] = idx
            self._addrs.append(addr)
        return idx

    def id_of(self, addr: str) -> int:
        return self._ids[addr]

    def address(self, idx: int) -> str:
        return self._addrs[idx]

    def __len__(self) -> int:
        return len(self._addrs)

    def __contains__(self, addr: str) -> bool:
        return addr in self._ids

    def addresses(self) -> list[str]:
        """All known addresses in id order (index 0 is the supernode token)."""
        return list(self._addrs)

    @classmethod
    def from_addresses(cls, addrs: Sequence[str]) -> "AddressTable":
        if not addrs or addrs[0] != SUPERNODE_TOKEN:
            raise InputError("address list must start with the supernode token")
        table = cls()
        for addr in addrs[1:]:
            table.intern(addr)
        return table


class TxGraph:
    """Immutable-after-build node and edge stores shared by MTG and CMTG.

    ``undirected`` holds encoded (min, max) pairs, ``directed`` encoded
    (src, dst) pairs; neither contains self-pairs.  ``nodes`` can include
    ids with no stored pairs (addresses whose only pairs were self-pairs).
    """

    def __init__(
        self,
        nodes: set[int] | None = None,
        directed: set[int] | None = None,
        undirected: set[int] | None = None,
        self_transfers: int = 0,
    ):
        self.nodes: set[int] = nodes if nodes is not None else set()
        self.directed: set[int] = directed if directed is not None else set()
        if undirected is None:
            undirected = {
                encode_pair(*sorted(decode_pair(c))) for c in self.directed
            }
        self.undirected: set[int] = undirected
        self.self_transfers = self_transfers
        self._sorted_nodes: np.ndarray | None = None
        self._raw_codes: dict[str, np.ndarray] = {}
        self._undirected_arr: np.ndarray | None = None
        self._directed_arr: np.ndarray | None = None
        self._adjacency: tuple[np.ndarray, np.ndarray] | None = None
        self._positions: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_undirected(self) -> int:
        return len(self.undirected)

    @property
    def n_directed(self) -> int:
        return len(self.directed)

    def sorted_nodes(self) -> np.ndarray:
        if self._sorted_nodes is None:
            self._sorted_nodes = np.fromiter(
                self.nodes, dtype=np.int64, count=len(self.nodes)
            )
            self._sorted_nodes.sort()
        return self._sorted_nodes

    def edge_codes(self, store: str) -> np.ndarray:
        """Cached numpy view of an edge store; element order unspecified."""
        arr = self._raw_codes.get(store)
        if arr is None:
            source = self.undirected if store == "undirected" else self.directed
            arr = np.fromiter(source, dtype=np.int64, count=len(source))
            self._raw_codes[store] = arr
        return arr

    def undirected_array(self) -> np.ndarray:
        """Sorted encoded (min, max) pair codes."""
        if self._undirected_arr is None:
            self._undirected_arr = np.sort(self.edge_codes("undirected"))
        return self._undirected_arr

    def directed_array(self) -> np.ndarray:
        if self._directed_arr is None:
            self._directed_arr = np.sort(self.edge_codes("directed"))
        return self._directed_arr

    def endpoint_positions(self, store: str) -> tuple[np.ndarray, np.ndarray]:
        """(src, dst) endpoint positions into sorted_nodes() for an edge store."""
        cached = self._positions.get(store)
        if cached is None:
            codes = self.undirected_array() if store == "undirected" else self.directed_array()
            order = self.sorted_nodes()
            cached = (
                np.searchsorted(order, codes >> _SHIFT),
                np.searchsorted(order, codes & _MASK),
            )
            self._positions[store] = cached
        return cached

    def has_undirected_edge(self, u: int, v: int) -> bool:
        if u == v:
            return False
        a, b = (u, v) if u < v else (v, u)
        return encode_pair(a, b) in self.undirected

    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR over the undirected simple graph.

        Returns ``(indptr, neighbors)`` where rows are positions in
        ``sorted_nodes()``; neighbor entries are also positions, sorted.
        Degree-0 nodes get empty rows.
        """
        if self._adjacency is None:
            order = self.sorted_nodes()
            us, vs = self.endpoint_positions("undirected")
            src = np.concatenate([us, vs])
            dst = np.concatenate([vs, us])
            perm = np.lexsort((dst, src))
            src, dst = src[perm], dst[perm]
            indptr = np.zeros(len(order) + 1, dtype=np.int64)
            np.add.at(indptr, src + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._adjacency = (indptr, dst)
        return self._adjacency

    def iter_undirected(self) -> Iterator[tuple[int, int]]:
        for code in self.undirected_array():
            yield decode_pair(int(code))


class MonthlyGraph(TxGraph):
    """Transaction graph of one calendar month (MTG)."""

    def __init__(self, month: int, **kwargs):
        super().__init__(**kwargs)
        self.month = month


class CumulativeGraph(TxGraph):
    """Running union of monthly graphs through ``through_month`` (CMTG)."""

    def __init__(self, through_month: int, **kwargs):
        super().__init__(**kwargs)
        self.through_month = through_month

    @classmethod
    def empty(cls) -> "CumulativeGraph":
        return cls(through_month=-1)


def edges_of_transaction(
    tx: TxRecord, table: AddressTable
) -> tuple[set[int], set[int], int]:
    """Expand one transaction into node ids and ordered pair codes.

    Returns ``(touched_nodes, directed_pair_codes, n_self_pairs)``.  Inputs
    and outputs are deduplicated before the cross product; a coinbase
    transaction pairs the supernode with each distinct output.
    """
    if tx.coinbase:
        in_ids: set[int] = {SUPERNODE_ID}
    else:
        in_ids = {table.intern(a) for a in tx.inputs}
    out_ids = {table.intern(a) for a in tx.outputs}

    touched = in_ids | out_ids
    pairs: set[int] = set()
    self_pairs = 0
    for i in in_ids:
        for o in out_ids:
            if i == o:
                self_pairs += 1
            else:
                pairs.add(encode_pair(i, o))
    return touched, pairs, self_pairs


def build_mtg(bucket: Iterable[TxRecord], month: int, table: AddressTable) -> MonthlyGraph:
    """Union of per-transaction edge sets with set semantics."""
    nodes: set[int] = set()
    raw_codes: list[int] = []
    self_transfers = 0
    for tx in bucket:
        touched, pairs, selfs = edges_of_transaction(tx, table)
        nodes |= touched
        self_transfers += selfs
        raw_codes.extend(pairs)
    # dedup in bulk; the undirected store is the unordered projection
    if raw_codes:
        codes = np.unique(np.array(raw_codes, dtype=np.int64))
        us, vs = codes >> _SHIFT, codes & _MASK
        und = np.unique(np.where(us < vs, codes, (vs << _SHIFT) | us))
        directed = set(codes.tolist())
        undirected = set(und.tolist())
    else:
        directed, undirected = set(), set()
    return MonthlyGraph(
        month=month,
        nodes=nodes,
        directed=directed,
        undirected=undirected,
        self_transfers=self_transfers,
    )


def accumulate_cmtg(prev: CumulativeGraph, mtg: MonthlyGraph) -> CumulativeGraph:
    """Extend a cumulative graph by the next month's MTG (exact set union)."""
    if mtg.month != prev.through_month + 1:
        raise InputError(
            f"month discontinuity: cumulative graph ends at {prev.through_month}, "
            f"monthly graph is for {mtg.month}"
        )
    return CumulativeGraph(
        through_month=mtg.month,
        nodes=prev.nodes | mtg.nodes,
        directed=prev.directed | mtg.directed,
        undirected=prev.undirected | mtg.undirected,
        self_transfers=prev.self_transfers + mtg.self_transfers,
    )


def degree_sequence(graph: TxGraph, variant: str = "undirected") -> np.ndarray:
    """Per-node degrees aligned with ``graph.sorted_nodes()``.

    ``undirected`` counts simple-graph neighbors; ``in``/``out`` count over
    the directed store, where opposite orientations are distinct edges;
    ``total`` is their sum.  The result length always equals the node count.
    """
    if variant not in DEGREE_VARIANTS:
        raise ValueError(f"variant must be one of {DEGREE_VARIANTS}, got {variant!r}")
    n = graph.n_nodes
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    store = "undirected" if variant == "undirected" else "directed"
    codes = graph.edge_codes(store)
    order = graph.sorted_nodes()
    count_src = variant in ("undirected", "out", "total")
    count_dst = variant in ("undirected", "in", "total")
    max_id = int(order[-1])
    if max_id <= 4 * n + 1024:
        # dense interned ids: count on the raw id domain, then project
        counts = np.zeros(max_id + 1, dtype=np.int64)
        if len(codes):
            if count_src:
                counts += np.bincount(codes >> _SHIFT, minlength=max_id + 1)
            if count_dst:
                counts += np.bincount(codes & _MASK, minlength=max_id + 1)
        return counts[order]
    degrees = np.zeros(n, dtype=np.int64)
    if len(codes):
        if count_src:
            degrees += np.bincount(np.searchsorted(order, codes >> _SHIFT), minlength=n)
        if count_dst:
            degrees += np.bincount(np.searchsorted(order, codes & _MASK), minlength=n)
    return degrees


def sample_edges(graph: TxGraph, k: int, seed: int) -> list[tuple[int, int]]:
    """Uniform sample without replacement from the undirected edge set.

    Deterministic for a fixed seed; returns min(k, |E|) decoded (u, v) pairs
    with u < v, in draw order.
    """
    if k < 1:
        raise ValueError(f"sample size must be >= 1, got {k}")
    codes = graph.undirected_array()
    size = min(k, len(codes))
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(codes), size=size, replace=False)
    return [decode_pair(int(codes[i])) for i in idx]


def write_edge_sample_csv(
    graph: TxGraph, table: AddressTable, k: int, seed: int, stream: IO[str]
) -> int:
    """Write a sampled edge list as ``src,dst`` rows of original addresses."""
    stream.write("src,dst\n")
    pairs = sample_edges(graph, k, seed)
    for u, v in pairs:
        stream.write(f"{table.address(u)},{table.address(v)}\n")
    return len(pairs)


SNAPSHOT_VERSION = 1


def save_snapshot(
    path, table: AddressTable, mtgs: Sequence[MonthlyGraph], *, genesis: YearMonth, coin: str = ""
) -> None:
    """Persist the address table and all monthly edge stores.

    The undirected store is not written: it is exactly the unordered
    projection of the directed store, and the loader rebuilds it.
    """
    meta = {
        "version": SNAPSHOT_VERSION,
        "coin": coin,
        "genesis_month": str(genesis),
        "months": [g.month for g in mtgs],
        "self_transfers": [g.self_transfers for g in mtgs],
    }
    payload: dict[str, np.ndarray] = {
        "meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        "addresses": np.frombuffer(
            "\n".join(table.addresses()).encode("utf-8"), dtype=np.uint8
        ),
    }
    for g in mtgs:
        payload[f"nodes_{g.month}"] = g.sorted_nodes()
        payload[f"directed_{g.month}"] = g.directed_array()
    np.savez_compressed(path, **payload)


def load_snapshot(path) -> tuple[AddressTable, list[MonthlyGraph], dict]:
    """Inverse of :func:`save_snapshot`."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("version") != SNAPSHOT_VERSION:
            raise InputError(f"unsupported snapshot version: {meta.get('version')}")
        addrs = bytes(data["addresses"]).decode("utf-8").split("\n")
        table = AddressTable.from_addresses(addrs)
        mtgs = []
        for month, selfs in zip(meta["months"], meta["self_transfers"]):
            directed = {int(c) for c in data[f"directed_{month}"]}
            nodes = {int(n) for n in data[f"nodes_{month}"]}
            mtgs.append(
                MonthlyGraph(
                    month=month,
                    nodes=nodes,
                    directed=directed,
                    self_transfers=int(selfs),
                )
            )
    return table, mtgs, meta
