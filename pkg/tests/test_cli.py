import csv
import json
from datetime import datetime, timezone

import numpy as np
import pytest

from conftest import SAMPLES
from scripts.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from swiftmem.schemas.reports import AblationReport, BenchReport


def _ms(*parts):
    return int(datetime(*parts, tzinfo=timezone.utc).timestamp() * 1000)


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "swiftmem.toml"
    path.write_text("d = 64\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def run(capsys, cfg):
    def _run(*argv):
        code = main(["--config", cfg, *argv])
        return code, capsys.readouterr()

    return _run


@pytest.fixture
def store(tmp_path, run):
    path = str(tmp_path / "store.jsonl")
    code, _ = run("--store", path, "ingest", "--input", str(SAMPLES / "conversations.jsonl"))
    assert code == EXIT_OK
    return path


@pytest.fixture
def empty_store(tmp_path, run):
    src = tmp_path / "empty.jsonl"
    src.write_text("", encoding="utf-8")
    path = str(tmp_path / "empty-store.jsonl")
    code, _ = run("--store", path, "ingest", "--input", str(src))
    assert code == EXIT_OK
    return path


def _data(captured):
    payload = json.loads(captured.out)
    assert payload["schema_version"] == "1"
    assert payload["generated_by"] == "swiftmem"
    return payload["data"]


def test_ingest_json(tmp_path, run):
    path = str(tmp_path / "store.jsonl")
    code, out = run(
        "--store", path, "--json", "ingest", "--input", str(SAMPLES / "conversations.jsonl")
    )
    assert code == EXIT_OK
    data = _data(out)
    assert data["episodes"] == 4
    assert data["conversations"] == 3
    assert data["skipped"] == []
    assert (tmp_path / "store.jsonl").exists()


def test_ingest_text_summary(tmp_path, run):
    code, out = run(
        "ingest", "--store", str(tmp_path / "s.jsonl"),
        "--input", str(SAMPLES / "conversations.jsonl"),
    )
    assert code == EXIT_OK
    assert out.out.startswith("INGEST SUMMARY")
    assert "Episodes: 4" in out.out


def test_ingest_missing_input(tmp_path, run):
    code, out = run("--store", str(tmp_path / "s.jsonl"), "ingest", "--input", "nope.jsonl")
    assert code == EXIT_DATA
    assert "Input not found" in out.err


def test_query_on_empty_store(empty_store, run):
    code, out = run("--store", empty_store, "query", "anything at all", "--user", "alice")
    assert code == EXIT_OK
    assert "RESULTS (0 hits, 0 candidates examined)" in out.out


def test_query_text_output(store, run):
    code, out = run("--store", store, "query", "dog walk by the river", "--user", "alice")
    assert code == EXIT_OK
    assert out.out.startswith('QUERY: "dog walk by the river" (user alice)')
    assert "PLAN" in out.out
    assert "TIMINGS (us)" in out.out


def test_since_until_become_one_interval(store, run):
    code, out = run(
        "--store", store, "--json", "query", "dog",
        "--user", "alice", "--since", "2022-03-01", "--until", "2022-04-01",
    )
    assert code == EXIT_OK
    data = _data(out)
    assert data["plan"]["intervals"] == [[_ms(2022, 3, 1), _ms(2022, 4, 1)]]
    assert {h["id"] for h in data["hits"]} <= {0, 1}
    for ep in data["episodes"]:
        assert _ms(2022, 3, 1) <= ep["ts"] < _ms(2022, 4, 1)


def test_full_routing_matches_exhaustive(store, run):
    argv = ("--store", store, "--json", "query", "dog camping pasta", "--user", "alice")
    _, routed = run(*argv, "--k", "1000", "--depth", "0")
    _, scanned = run(*argv, "--exhaustive")
    routed, scanned = _data(routed), _data(scanned)

    assert scanned["exhaustive"] is True
    assert [h["id"] for h in routed["hits"]] == [h["id"] for h in scanned["hits"]]
    assert np.allclose(
        [h["score"] for h in routed["hits"]],
        [h["score"] for h in scanned["hits"]],
        atol=1e-9,
    )
    assert len(scanned["hits"]) == 3


@pytest.mark.parametrize(
    "extra",
    [
        ("--since", "not-a-date"),
        ("--since", "2023-01-02", "--until", "2023-01-01"),
        ("--now", "whenever"),
    ],
)
def test_bad_bounds_are_usage_errors(store, run, extra):
    code, out = run("--store", store, "query", "dog", *extra)
    assert code == EXIT_USAGE
    assert out.err.startswith("Error:")


def test_consolidate_skipped_on_empty_store(empty_store, run):
    code, out = run("--store", empty_store, "consolidate")
    assert code == EXIT_OK
    assert "Skipped: below thresholds" in out.out


def test_forced_consolidation_is_idempotent(store, run):
    code, first = run("--store", store, "--json", "consolidate", "--force")
    assert code == EXIT_OK
    first = _data(first)
    assert first["skipped"] is False
    assert first["fragmentation_after"] == 0.0

    _, second = run("--store", store, "--json", "consolidate", "--force")
    assert _data(second)["moved"] == 0


def test_consolidation_keeps_query_results(store, run):
    argv = ("--store", store, "--json", "query", "italian basil pasta", "--user", "alice")
    _, before = run(*argv)
    run("--store", store, "consolidate", "--force")
    _, after = run(*argv)
    before, after = _data(before)["hits"], _data(after)["hits"]
    assert [h["id"] for h in before] == [h["id"] for h in after]
    assert np.allclose([h["score"] for h in before], [h["score"] for h in after], atol=1e-9)


def test_stats_on_empty_store(empty_store, run):
    code, out = run("--store", empty_store, "--json", "stats")
    assert code == EXIT_OK
    data = _data(out)
    assert data["n_mem"] == 0
    assert data["tags"] == data["edges"] == 0
    assert data["users"] == {}


def test_stats_text(store, run):
    code, out = run("stats", "--store", store)
    assert code == EXIT_OK
    assert "Episodes: 4" in out.out
    assert "  alice: 3" in out.out
    assert "  bob: 1" in out.out


def test_dump_dag_formats(store, run):
    code, out = run("--store", store, "dump-dag")
    assert code == EXIT_OK
    assert out.out.startswith("digraph tags {")

    _, out = run("--store", store, "dump-dag", "--format", "json")
    nodes = json.loads(out.out)
    assert nodes
    assert {"tag", "episodes", "parents", "children"} <= set(nodes[0])
    assert sum(n["episodes"] for n in nodes) >= 4


def test_missing_store_is_data_error(tmp_path, run):
    code, out = run("--store", str(tmp_path / "none.jsonl"), "--json", "stats")
    assert code == EXIT_DATA
    err = json.loads(out.out)
    assert err["status_code"] == EXIT_DATA
    assert err["type"] == "data"
    assert "Store not found" in err["detail"]


def test_corrupt_snapshot_reports_line(store, run):
    with open(store, "r", encoding="utf-8") as f:
        garbage_line = len(f.readlines()) + 1
    with open(store, "a", encoding="utf-8") as f:
        f.write("this is not json\n")
    code, out = run("--store", store, "--json", "stats")
    assert code == EXIT_DATA
    err = json.loads(out.out)
    assert err["type"] == "CorruptSnapshot"
    assert err["additional_info"] == {"line": garbage_line}


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["query"],
        ["ingest"],
        ["bench", "--n", "many"],
        ["bench", "--n", "-1"],
        ["query", "dog", "--depth", "-1"],
        ["query", "dog", "--k", "-2"],
        ["query", "dog", "--top-k", "0"],
        ["frobnicate"],
    ],
)
def test_usage_errors(run, argv):
    code, _ = run(*argv)
    assert code == EXIT_USAGE


def test_usage_error_json(run):
    code, out = run("--json", "query")
    assert code == EXIT_USAGE
    assert json.loads(out.out)["type"] == "usage"


def test_unknown_config_key(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("warp = 9\n", encoding="utf-8")
    assert main(["--config", str(path), "stats"]) == EXIT_USAGE
    assert "warp" in capsys.readouterr().err


def test_bench_with_empty_corpus(run):
    code, out = run("--json", "bench", "--n", "0", "--tags", "10")
    assert code == EXIT_OK
    report = BenchReport.model_validate(_data(out))
    assert report.n == 0
    assert report.queries == 0
    assert report.consolidation is None


def test_small_bench(run):
    code, out = run(
        "--json", "bench", "--n", "300", "--tags", "20", "--queries", "10", "--seed", "3"
    )
    assert code == EXIT_OK
    report = BenchReport.model_validate(_data(out))
    assert report.d == 64
    assert report.queries == 10
    assert len(report.candidate_counts) == 10
    assert 0.0 <= report.recall_vs_exhaustive <= 1.0
    assert report.baseline == "exhaustive"
    assert report.consolidation is not None
    assert report.consolidation.hits_identical


def test_bench_text(run):
    code, out = run("bench", "--n", "200", "--tags", "10", "--queries", "5", "--no-consolidate")
    assert code == EXIT_OK
    assert out.out.startswith("BENCHMARK")
    assert "Baseline: in-process exhaustive scan" in out.out
    assert "CONSOLIDATION" not in out.out


def test_ablation_writes_csv(tmp_path, run):
    csv_path = tmp_path / "ablation.csv"
    code, out = run(
        "--json", "ablate-temporal", "--n", "300", "--tags", "20", "--queries", "10",
        "--hint-ratio", "0,0.5,1", "--csv", str(csv_path),
    )
    assert code == EXIT_OK
    report = AblationReport.model_validate(_data(out))
    assert [r.hinted_queries for r in report.rows] == [0, 5, 10]
    means = [r.candidates.mean for r in report.rows]
    assert means == sorted(means, reverse=True)

    with open(csv_path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 3
    assert float(rows[2]["hint_ratio"]) == 1.0


def test_ablation_rejects_bad_ratio(run):
    code, _ = run("ablate-temporal", "--n", "10", "--hint-ratio", "0,1.5")
    assert code == EXIT_USAGE


def test_scale(tmp_path, run):
    csv_path = tmp_path / "scale.csv"
    code, out = run(
        "scale", "--sizes", "100,400", "--tags", "10", "--queries", "5", "--csv", str(csv_path)
    )
    assert code == EXIT_OK
    assert out.out.startswith("SCALING")
    with open(csv_path, newline="", encoding="utf-8") as f:
        assert [int(r["n"]) for r in csv.DictReader(f)] == [100, 400]


def test_out_flag_writes_file(store, tmp_path, run):
    out_path = tmp_path / "stats.json"
    code, out = run("--store", store, "stats", "--json", "--out", str(out_path))
    assert code == EXIT_OK
    assert out.out == ""
    assert json.loads(out_path.read_text(encoding="utf-8"))["data"]["n_mem"] == 4
