import csv
import io
import json
import subprocess
import sys

import pytest

from tsgraph.cli import EXIT_INVALID, EXIT_OK, EXIT_USAGE, main


def call(capsys, *argv):
    rc = main([str(a) for a in argv])
    out = capsys.readouterr()
    return rc, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture(scope="module")
def collection(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "coll"
    assert main(["generate", str(out), "--vertices", "150", "--instances", "3", "--components", "3", "--seed", "4"]) == 0
    return out


def test_generate_deploy_run_is_reproducible(capsys, tmp_path, collection):
    results = []
    for k in range(2):
        root = tmp_path / f"d{k}"
        rc, out, _ = call(capsys, "deploy", collection, "--root", root, "--hosts", 2, "--bins", 2)
        assert rc == EXIT_OK
        table = rows(out)
        assert [int(r["host"]) for r in table] == [0, 1]
        assert all(int(r["template_slices"]) == 1 for r in table)
        rc, out, _ = call(capsys, "run", "sssp", "--root", root, "--source", 0)
        assert rc == EXIT_OK
        results.append(out)
    assert results[0] == results[1]
    assert rows(results[0])[0] == {"vertex": "0", "distance": "0.0"}


def test_sssp_does_not_depend_on_layout(capsys, tmp_path, collection):
    outs = []
    for hosts, bins, ipack in [(1, 1, 1), (2, 2, 2), (3, 1, 3)]:
        root = tmp_path / f"h{hosts}"
        call(capsys, "deploy", collection, "--root", root, "--hosts", hosts, "--bins", bins, "--ipack", ipack)
        rc, out, _ = call(capsys, "run", "sssp", "--root", root, "--source", 7, "--format", "json")
        assert rc == EXIT_OK
        outs.append(json.loads(out))
    assert outs[0] == outs[1] == outs[2]


def test_pagerank_with_workers_and_stats(capsys, tmp_path, collection, monkeypatch):
    root = tmp_path / "d"
    monkeypatch.setenv("TSGRAPH_ROOT", str(root))
    call(capsys, "deploy", collection, "--hosts", 2)
    rc, out, _ = call(capsys, "run", "pagerank", "--workers", 4, "--pr-iters", 5, "--stats", tmp_path / "s.csv")
    assert rc == EXIT_OK
    ranks = rows(out)
    assert len(ranks) == 3 * 150
    for t in (1, 2, 3):
        assert sum(float(r["rank"]) for r in ranks if r["timestep"] == str(t)) == pytest.approx(1.0, abs=1e-6)
    assert len(rows((tmp_path / "s.csv").read_text())) == 3


def test_nhop_and_time_range(capsys, tmp_path, collection):
    root = tmp_path / "d"
    call(capsys, "deploy", collection, "--root", root, "--hosts", 2)
    rc, out, _ = call(capsys, "run", "nhop", "--root", root, "--source", 3, "--n-hops", 2, "--time-range", 0, 7200)
    assert rc == EXIT_OK
    assert len(rows(out)) == 17


def test_error_exit_codes(capsys, tmp_path, collection, monkeypatch):
    monkeypatch.delenv("TSGRAPH_ROOT", raising=False)
    root = tmp_path / "d"
    call(capsys, "deploy", collection, "--root", root, "--hosts", 1)
    assert call(capsys, "run", "nosuchapp", "--root", root)[0] == EXIT_USAGE
    assert call(capsys, "run", "sssp", "--root", root)[0] == EXIT_USAGE
    rc, _, err = call(capsys, "run", "sssp", "--root", root, "--source", 999999)
    assert rc == EXIT_INVALID and "999999" in err
    rc, _, err = call(capsys, "deploy", collection)
    assert rc == EXIT_USAGE and "TSGRAPH_ROOT" in err
    assert call(capsys, "bench-scan", "--bins", "x,y")[0] == EXIT_USAGE


def test_invalid_collection_is_rejected(capsys, tmp_path):
    bad = tmp_path / "bad"
    (bad / "instances").mkdir(parents=True)
    (bad / "template.txt").write_text("DIRECTED 0\nV 1\nE 0 1 2\n")
    rc, _, err = call(capsys, "deploy", bad, "--root", tmp_path / "d")
    assert rc == EXIT_INVALID and err


def test_infeasible_generate(capsys, tmp_path):
    rc, _, _ = call(capsys, "generate", tmp_path / "g", "--vertices", 5, "--topology", "path", "--edges", 9)
    assert rc == EXIT_INVALID


def test_bench_scan_on_a_small_collection(capsys, tmp_path, collection):
    rc, out, _ = call(
        capsys, "bench-scan", "--collection", collection, "--root", tmp_path / "b", "--hosts", 2,
        "--bins", "2", "--ipack", "1,3", "--caches", "0,8", "--rows-dir", tmp_path / "rows",
    )
    assert rc == EXIT_OK
    summary = rows(out)
    assert len(summary) == 4
    assert sorted(p.name for p in (tmp_path / "rows").iterdir()) == [
        "s2-i1-c0.csv", "s2-i1-c8.csv", "s2-i3-c0.csv", "s2-i3-c8.csv",
    ]


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "tsgraph.cli", "generate", str(tmp_path / "g"), "--vertices", "10", "--instances", "1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "g" / "template.txt").exists()
