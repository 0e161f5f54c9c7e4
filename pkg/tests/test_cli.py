import json

import pytest

from txgraph.cli import main
from txgraph.ingest import YearMonth, read_records, write_records
from txgraph.synth import synthetic_records


@pytest.fixture(scope="module")
def records_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "records.jsonl"
    write_records(synthetic_records(months=3, tx_per_month=120, seed=2), path)
    return path


class TestIngestCommand:
    def test_validate_and_convert(self, records_file, tmp_path, capsys):
        out = tmp_path / "records.csv"
        manifest = tmp_path / "manifest.json"
        code = main(
            [
                "ingest",
                "--records", str(records_file),
                "--out", str(out),
                "--manifest", str(manifest),
                "--coin", "demo",
            ]
        )
        assert code == 0
        assert "records ok" in capsys.readouterr().out
        assert read_records(out) == read_records(records_file)
        meta = json.loads(manifest.read_text())
        assert meta["coin_name"] == "demo" and meta["source"] == "file"
        assert meta["record_count"] == len(read_records(records_file))

    def test_missing_file_is_input_error(self, tmp_path):
        assert main(["ingest", "--records", str(tmp_path / "nope.jsonl")]) == 1

    def test_malformed_line_is_input_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{nope\n")
        assert main(["ingest", "--records", str(bad)]) == 1


class TestRunCommand:
    def test_full_run_writes_report(self, records_file, tmp_path, capsys):
        out = tmp_path / "report"
        code = main(
            [
                "run",
                "--records", str(records_file),
                "--out", str(out),
                "--seed", "1",
                "--samples", "500",
                "--clique-steps", "10000",
            ]
        )
        assert code == 0
        assert (out / "monthly.csv").exists()
        assert (out / "summary.json").exists()
        assert (out / "plotdata" / "sizes.csv").exists()

    def test_run_without_inputs_fails_cleanly(self, tmp_path):
        assert main(["run", "--out", str(tmp_path / "r")]) == 1


class TestBuildAndSample:
    def test_build_snapshot_then_sample(self, records_file, tmp_path, capsys):
        snap = tmp_path / "graphs.npz"
        assert main(["build", "--records", str(records_file), "--out", str(snap)]) == 0
        assert snap.exists()

        sample = tmp_path / "edges.csv"
        code = main(
            [
                "sample-edges",
                "--snapshot", str(snap),
                "--month", "0",
                "--k", "10",
                "--seed", "4",
                "--out", str(sample),
            ]
        )
        assert code == 0
        lines = sample.read_text().splitlines()
        assert lines[0] == "src,dst" and len(lines) == 11

    def test_cumulative_sample_from_records(self, records_file, tmp_path):
        sample = tmp_path / "edges.csv"
        code = main(
            [
                "sample-edges",
                "--records", str(records_file),
                "--cumulative",
                "--k", "5",
                "--out", str(sample),
            ]
        )
        assert code == 0
        assert len(sample.read_text().splitlines()) == 6

    def test_unknown_month_is_input_error(self, records_file, tmp_path):
        code = main(
            [
                "sample-edges",
                "--records", str(records_file),
                "--month", "99",
                "--out", str(tmp_path / "x.csv"),
            ]
        )
        assert code == 1


class TestFitCommand:
    def test_power_law_fit(self, tmp_path, capsys):
        degrees = tmp_path / "degrees.csv"
        degrees.write_text("degree\n1\n1\n1\n1\n2\n")
        assert main(["fit", "power-law", "--in", str(degrees)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["alpha"] == pytest.approx(2.2022, abs=1e-3)

    def test_power_model_fit(self, tmp_path, capsys):
        points = tmp_path / "points.csv"
        points.write_text("nodes,edges\n10,20\n100,200\n1000,2000\n")
        assert main(["fit", "power-model", "--in", str(points)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["a"] == pytest.approx(2.0) and out["b"] == pytest.approx(1.0)

    def test_degenerate_fit_is_runtime_error(self, tmp_path):
        degrees = tmp_path / "degrees.csv"
        degrees.write_text("degree\n2\n2\n2\n")
        assert main(["fit", "power-law", "--in", str(degrees)]) == 2


class TestCorrelateCommand:
    def test_correlates_report_column(self, records_file, tmp_path, capsys):
        out = tmp_path / "report"
        main(
            [
                "run",
                "--records", str(records_file),
                "--out", str(out),
                "--samples", "200",
                "--clique-steps", "5000",
            ]
        )
        monthly = out / "monthly.csv"
        genesis = YearMonth.from_timestamp(min(r.ts for r in read_records(records_file)))
        # proportional price series -> r == 1
        rows = [line.split(",") for line in monthly.read_text().splitlines()[1:]]
        price = tmp_path / "price.csv"
        price.write_text(
            "month,price\n"
            + "".join(f"{genesis.add(int(r[0]))},{int(r[1]) / 7 + 1}\n" for r in rows)
        )
        capsys.readouterr()
        code = main(
            [
                "correlate",
                "--metrics", str(monthly),
                "--column", "mtg_nodes",
                "--price", str(price),
                "--genesis-month", str(genesis),
            ]
        )
        assert code == 0
        result = json.loads(capsys.readouterr().out)
        assert result["r"] == pytest.approx(1.0)
        assert result["months"] == len(rows)

    def test_unknown_column(self, records_file, tmp_path):
        out = tmp_path / "report"
        main(["run", "--records", str(records_file), "--out", str(out), "--samples", "10"])
        price = tmp_path / "price.csv"
        price.write_text("month,price\n2011-01,1\n")
        code = main(
            [
                "correlate",
                "--metrics", str(out / "monthly.csv"),
                "--column", "bogus",
                "--price", str(price),
                "--genesis-month", "2011-01",
            ]
        )
        assert code == 1
