import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from txgraph.errors import InputError
from txgraph.graphs import (
    SUPERNODE_ID,
    AddressTable,
    CumulativeGraph,
    MonthlyGraph,
    accumulate_cmtg,
    build_mtg,
    decode_pair,
    degree_sequence,
    edges_of_transaction,
    encode_pair,
    load_snapshot,
    sample_edges,
    save_snapshot,
    write_edge_sample_csv,
)
from txgraph.ingest import SUPERNODE_TOKEN, TxRecord, YearMonth


def pairs_of(graph, table):
    return {
        (table.address(u), table.address(v))
        for u, v in (decode_pair(c) for c in graph.directed)
    }


class TestAddressTable:
    def test_supernode_reserved(self):
        table = AddressTable()
        assert table.address(SUPERNODE_ID) == SUPERNODE_TOKEN
        assert table.intern("A") == 1

    def test_injective_both_ways(self):
        table = AddressTable()
        ids = [table.intern(a) for a in ["A", "B", "A", "C"]]
        assert ids == [1, 2, 1, 3]
        assert [table.address(i) for i in (1, 2, 3)] == ["A", "B", "C"]

    def test_rejects_reserved_token(self):
        with pytest.raises(InputError):
            AddressTable().intern(SUPERNODE_TOKEN)


class TestEdgesOfTransaction:
    def test_fig1_cross_product(self, fig1_tx):
        table = AddressTable()
        touched, pairs, selfs = edges_of_transaction(fig1_tx, table)
        names = {
            (table.address(u), table.address(v))
            for u, v in (decode_pair(c) for c in pairs)
        }
        assert names == {("A", "D"), ("A", "E"), ("B", "D"), ("B", "E"), ("C", "D"), ("C", "E")}
        assert len(touched) == 5 and selfs == 0

    def test_coinbase_supernode_fanout(self):
        table = AddressTable()
        tx = TxRecord(ts=1, inputs=(), outputs=("M1", "M2"), coinbase=True)
        touched, pairs, selfs = edges_of_transaction(tx, table)
        assert {decode_pair(c)[0] for c in pairs} == {SUPERNODE_ID}
        assert len(pairs) == 2 and SUPERNODE_ID in touched

    def test_self_pair_excluded_but_node_kept(self):
        table = AddressTable()
        tx = TxRecord(ts=1, inputs=("A",), outputs=("A", "B"))
        touched, pairs, selfs = edges_of_transaction(tx, table)
        assert [decode_pair(c) for c in pairs] == [(table.id_of("A"), table.id_of("B"))]
        assert selfs == 1
        assert touched == {table.id_of("A"), table.id_of("B")}

    def test_pure_self_transfer_keeps_node(self):
        table = AddressTable()
        tx = TxRecord(ts=1, inputs=("A",), outputs=("A",))
        touched, pairs, selfs = edges_of_transaction(tx, table)
        assert pairs == set() and selfs == 1
        assert touched == {table.id_of("A")}

    def test_duplicate_addresses_deduplicated(self):
        table = AddressTable()
        tx = TxRecord(ts=1, inputs=("A", "A"), outputs=("B", "B"))
        _, pairs, _ = edges_of_transaction(tx, table)
        assert len(pairs) == 1

    @given(
        st.lists(st.integers(0, 40), min_size=1, max_size=8, unique=True),
        st.lists(st.integers(50, 90), min_size=1, max_size=8, unique=True),
    )
    @settings(max_examples=50)
    def test_bipartite_completeness(self, ins, outs):
        # disjoint input/output sets yield exactly i*o ordered pairs
        table = AddressTable()
        tx = TxRecord(
            ts=1,
            inputs=tuple(f"i{n}" for n in ins),
            outputs=tuple(f"o{n}" for n in outs),
        )
        _, pairs, selfs = edges_of_transaction(tx, table)
        assert len(pairs) == len(ins) * len(outs)
        assert selfs == 0


class TestBuildMtg:
    def test_fig1_counts(self, fig1_graph):
        graph, _ = fig1_graph
        assert graph.n_nodes == 5
        assert graph.n_undirected == 6
        assert graph.n_directed == 6

    def test_duplicate_tx_idempotent(self, fig1_tx):
        table = AddressTable()
        graph = build_mtg([fig1_tx, fig1_tx], 0, table)
        assert graph.n_nodes == 5 and graph.n_undirected == 6

    def test_reverse_edge_adds_directed_only(self, fig1_tx):
        # oracle: hand enumeration of the construction rule
        table = AddressTable()
        back = TxRecord(ts=fig1_tx.ts, inputs=("D",), outputs=("A",))
        graph = build_mtg([fig1_tx, back], 0, table)
        assert graph.n_undirected == 6
        assert graph.n_directed == 7
        assert ("D", "A") in pairs_of(graph, table)

    def test_undirected_is_projection_of_directed(self, fig1_tx):
        table = AddressTable()
        extra = TxRecord(ts=1, inputs=("E",), outputs=("A", "Z"))
        graph = build_mtg([fig1_tx, extra], 0, table)
        projected = {
            encode_pair(*sorted(decode_pair(c))) for c in graph.directed
        }
        assert projected == graph.undirected

    def test_endpoints_resolve_in_table(self, fig1_tx):
        table = AddressTable()
        graph = build_mtg([fig1_tx], 0, table)
        for code in graph.directed:
            u, v = decode_pair(code)
            assert table.address(u) and table.address(v)


class TestAccumulate:
    def r(self, ts, a, b):
        return TxRecord(ts=ts, inputs=(a,), outputs=(b,))

    def test_base_case_equals_mtg0(self):
        table = AddressTable()
        mtg0 = build_mtg([self.r(1, "A", "B")], 0, table)
        cmtg = accumulate_cmtg(CumulativeGraph.empty(), mtg0)
        assert cmtg.through_month == 0
        assert cmtg.nodes == mtg0.nodes and cmtg.undirected == mtg0.undirected

    def test_disjoint_sizes_add(self):
        table = AddressTable()
        mtg0 = build_mtg([self.r(1, "A", "B")], 0, table)
        mtg1 = build_mtg([self.r(2, "C", "D")], 1, table)
        cmtg = accumulate_cmtg(accumulate_cmtg(CumulativeGraph.empty(), mtg0), mtg1)
        assert cmtg.n_nodes == 4 and cmtg.n_undirected == 2

    def test_overlap_against_batch_oracle(self):
        # oracle: union over raw buckets built as one graph
        table = AddressTable()
        bucket0 = [self.r(1, "A", "B"), self.r(1, "B", "C")]
        bucket1 = [self.r(2, "B", "C"), self.r(2, "C", "D")]
        mtg0 = build_mtg(bucket0, 0, table)
        mtg1 = build_mtg(bucket1, 1, table)
        cmtg = accumulate_cmtg(accumulate_cmtg(CumulativeGraph.empty(), mtg0), mtg1)
        batch = build_mtg(bucket0 + bucket1, 0, AddressTable())
        assert cmtg.n_nodes == batch.n_nodes
        assert cmtg.n_undirected == batch.n_undirected
        assert cmtg.n_directed == batch.n_directed

    def test_month_discontinuity_rejected(self):
        table = AddressTable()
        mtg2 = build_mtg([self.r(1, "A", "B")], 2, table)
        with pytest.raises(InputError):
            accumulate_cmtg(CumulativeGraph.empty(), mtg2)

    def test_monotone_sizes(self):
        table = AddressTable()
        cmtg = CumulativeGraph.empty()
        sizes = []
        for m in range(5):
            mtg = build_mtg([self.r(m, f"x{m}", f"y{m % 2}")], m, table)
            cmtg = accumulate_cmtg(cmtg, mtg)
            sizes.append((cmtg.n_nodes, cmtg.n_undirected))
        assert sizes == sorted(sizes)


class TestDegreeSequence:
    def test_fig1_undirected_degrees(self, fig1_graph):
        graph, table = fig1_graph
        deg = degree_sequence(graph, "undirected")
        by_name = dict(zip((table.address(i) for i in graph.sorted_nodes()), deg))
        assert by_name == {"A": 2, "B": 2, "C": 2, "D": 3, "E": 3}

    def test_two_orientations_counted_separately(self):
        table = AddressTable()
        txs = [
            TxRecord(ts=1, inputs=("A",), outputs=("B",)),
            TxRecord(ts=1, inputs=("B",), outputs=("A",)),
        ]
        graph = build_mtg(txs, 0, table)
        order = list(graph.sorted_nodes())
        a = order.index(table.id_of("A"))
        assert degree_sequence(graph, "total")[a] == 2
        assert degree_sequence(graph, "undirected")[a] == 1
        assert degree_sequence(graph, "in")[a] == 1
        assert degree_sequence(graph, "out")[a] == 1

    def test_empty_graph(self):
        graph = MonthlyGraph(month=0)
        for variant in ("undirected", "in", "out", "total"):
            assert len(degree_sequence(graph, variant)) == 0

    def test_length_equals_node_count_with_isolated(self):
        table = AddressTable()
        graph = build_mtg([TxRecord(ts=1, inputs=("A",), outputs=("A",))], 0, table)
        assert graph.n_nodes == 1
        assert list(degree_sequence(graph, "undirected")) == [0]

    def test_bad_variant(self, fig1_graph):
        with pytest.raises(ValueError):
            degree_sequence(fig1_graph[0], "sideways")


class TestSampleEdges:
    def big_graph(self):
        table = AddressTable()
        txs = [TxRecord(ts=1, inputs=(f"s{i}",), outputs=(f"t{i}",)) for i in range(500)]
        return build_mtg(txs, 0, table), table

    def test_sample_is_uniform_subset_without_replacement(self):
        graph, _ = self.big_graph()
        picked = sample_edges(graph, 100, seed=3)
        assert len(picked) == 100
        assert len(set(picked)) == 100
        codes = set(int(c) for c in graph.undirected_array())
        assert all(encode_pair(u, v) in codes for u, v in picked)

    def test_k_exceeding_edges_returns_all(self):
        graph, _ = self.big_graph()
        assert len(sample_edges(graph, 10_000, seed=1)) == graph.n_undirected

    def test_deterministic_per_seed(self):
        graph, _ = self.big_graph()
        assert sample_edges(graph, 50, seed=9) == sample_edges(graph, 50, seed=9)
        assert sample_edges(graph, 50, seed=9) != sample_edges(graph, 50, seed=10)

    def test_csv_export_uses_addresses(self):
        graph, table = self.big_graph()
        buf = io.StringIO()
        n = write_edge_sample_csv(graph, table, 5, 0, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "src,dst" and n == 5 and len(lines) == 6
        src, dst = lines[1].split(",")
        assert src.startswith(("s", "t")) and dst.startswith(("s", "t"))

    def test_k_must_be_positive(self, fig1_graph):
        with pytest.raises(ValueError):
            sample_edges(fig1_graph[0], 0, seed=1)


class TestSnapshot:
    def test_round_trip(self, tmp_path, fig1_tx):
        table = AddressTable()
        mtg0 = build_mtg([fig1_tx], 0, table)
        mtg1 = build_mtg(
            [TxRecord(ts=2, inputs=("E",), outputs=("E", "F"))], 1, table
        )
        path = tmp_path / "snap.npz"
        save_snapshot(path, table, [mtg0, mtg1], genesis=YearMonth(2017, 5), coin="lc")
        table2, mtgs2, meta = load_snapshot(path)
        assert meta["genesis_month"] == "2017-05" and meta["coin"] == "lc"
        assert table2.addresses() == table.addresses()
        for orig, loaded in zip([mtg0, mtg1], mtgs2):
            assert loaded.month == orig.month
            assert loaded.nodes == orig.nodes
            assert loaded.directed == orig.directed
            assert loaded.undirected == orig.undirected
            assert loaded.self_transfers == orig.self_transfers

    def test_version_check(self, tmp_path):
        import json as _json

        import numpy as _np

        path = tmp_path / "bad.npz"
        meta = _np.frombuffer(_json.dumps({"version": 99}).encode(), dtype=_np.uint8)
        _np.savez(path, meta=meta, addresses=_np.frombuffer(b"__COINBASE__", dtype=_np.uint8))
        with pytest.raises(InputError):
            load_snapshot(path)


@given(
    st.lists(
        st.tuples(st.integers(0, 10), st.sampled_from("abcdefgh"), st.sampled_from("abcdefgh")),
        min_size=1,
        max_size=30,
    )
)
@settings(max_examples=50)
def test_duplication_invariance(triples):
    records = [
        TxRecord(ts=ts, inputs=(f"in_{a}",), outputs=(f"out_{b}",)) for ts, a, b in triples
    ]
    g1 = build_mtg(records, 0, AddressTable())
    g2 = build_mtg(records + records, 0, AddressTable())
    assert g1.nodes == g2.nodes
    assert g1.directed == g2.directed
    assert g1.undirected == g2.undirected
