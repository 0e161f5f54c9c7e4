import pytest

from txgraph.graphs import AddressTable, TxGraph, build_mtg, encode_pair
from txgraph.ingest import TxRecord


@pytest.fixture
def fig1_tx() -> TxRecord:
    # the canonical 3-inputs/2-outputs transaction
    return TxRecord(ts=1500000000, inputs=("A", "B", "C"), outputs=("D", "E"))


@pytest.fixture
def fig1_graph(fig1_tx):
    table = AddressTable()
    return build_mtg([fig1_tx], 0, table), table


def graph_of(edges, nodes=None) -> TxGraph:
    """Undirected test graph from (u, v) pairs; isolated nodes allowed."""
    node_set = set(nodes or [])
    codes = set()
    for u, v in edges:
        assert u != v
        a, b = (u, v) if u < v else (v, u)
        codes.add(encode_pair(a, b))
        node_set.add(u)
        node_set.add(v)
    return TxGraph(nodes=node_set, directed=set(codes), undirected=set(codes))
