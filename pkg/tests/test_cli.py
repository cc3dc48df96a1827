import json
import subprocess
import sys

import pytest

from fastdsom import cli
from fastdsom.dissimilarity import load_matrix
from fastdsom.results import RESULT_FILES, STATS_HEADER


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def matrix_file(tmp_path):
    pts = tmp_path / "pts.csv"
    mat = tmp_path / "m.txt"
    assert run("gen", "--n", 60, "--seed", 3, "--out", pts) == 0
    assert run("dist", pts, "--integerize", "1e8", "--out", mat) == 0
    return mat


def test_gen_and_dist(tmp_path, matrix_file):
    m = load_matrix(matrix_file)
    assert m.n == 60 and m.kind == "integer"
    assert (tmp_path / "pts.csv.manifest.json").is_file()
    assert (tmp_path / "m.txt.manifest.json").is_file()


def test_dist_words(tmp_path):
    words = tmp_path / "w.txt"
    words.write_text("a\nb\n", encoding="utf-8")
    out = tmp_path / "wm.txt"
    assert run("dist", words, "--kind", "words", "--out", out) == 0
    assert load_matrix(out).values.tolist() == [[0, 1], [1, 0]]


def test_train_outputs(tmp_path, matrix_file, capsys):
    out = tmp_path / "run"
    assert run("train", matrix_file, "--m", 3, "--epochs", 10, "--variant", "fast", "--out", out) == 0
    assert "quantization error:" in capsys.readouterr().out
    assert sorted(p.name for p in out.iterdir()) == sorted(RESULT_FILES + ("manifest.json",))
    assert (out / "stats.csv").read_text().splitlines()[0] == STATS_HEADER
    assert len((out / "stats.csv").read_text().splitlines()) == 11
    assignments = (out / "assignments.txt").read_text().splitlines()
    assert len(assignments) == 60 and assignments[0].split()[0] == "0"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "train" and manifest["params"]["epochs"] == 10


def test_rerun_reproduces_bytes(tmp_path, matrix_file):
    first = tmp_path / "a"
    assert run("train", matrix_file, "--m", 3, "--epochs", 8, "--seed", 4, "--out", first) == 0
    second = tmp_path / "b"
    assert run("rerun", first / "manifest.json", "--out", second) == 0
    for name in RESULT_FILES:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_verify_ok_and_fault(tmp_path, matrix_file, capsys):
    report = tmp_path / "report.txt"
    assert run("verify", matrix_file, "--m", 3, "--epochs", 10, "--seeds", 3, "--out", report) == 0
    assert "identical" in report.read_text()
    dup = tmp_path / "dup.txt"
    dup.write_text("a\na\nb\nb\nab\nab\nba\nba\nabc\nabc\n", encoding="utf-8")
    dm = tmp_path / "dm.txt"
    assert run("dist", dup, "--kind", "words", "--out", dm) == 0
    code = run("verify", dm, "--m", 2, "--epochs", 10, "--seeds", 3, "--inject-tie-fault")
    assert code == cli.EXIT_DIVERGENCE
    assert "first differs at epoch" in capsys.readouterr().out


def test_bench_small(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code = run("bench", "--sizes", "30x4,40x4,30x9,40x9", "--variants", "partial,fast", "--repeats", 1,
               "--epochs", 3, "--out", out)
    assert code == 0
    assert out.read_text().splitlines()[0] == "variant,N,M,L,seed,repeats,wall_seconds,relative_sd"
    assert len(out.read_text().splitlines()) == 9
    assert "partial.loglog.alpha=" in (tmp_path / "t.fit.kv").read_text()
    assert (tmp_path / "t.fit.txt").is_file()


class TestInputErrors:
    def test_missing_matrix(self, tmp_path, capsys):
        assert run("train", tmp_path / "nope.txt", "--out", tmp_path / "o") == cli.EXIT_INPUT
        assert "no such file" in capsys.readouterr().err

    def test_too_many_models(self, tmp_path, matrix_file, capsys):
        assert run("train", matrix_file, "--m", 8, "--out", tmp_path / "o") == cli.EXIT_INPUT
        assert "too high" in capsys.readouterr().err

    def test_bad_ratio(self, tmp_path, matrix_file):
        assert run("train", matrix_file, "--ratio", 20, "--out", tmp_path / "o") == cli.EXIT_INPUT

    def test_asymmetric_matrix(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("DSOM-DISSIM 1\n2\n0 1\n2 0\n")
        assert run("train", bad, "--m", 1, "--out", tmp_path / "o") == cli.EXIT_INPUT
        assert "(0, 1)" in capsys.readouterr().err

    def test_bad_sizes(self, tmp_path):
        assert run("bench", "--sizes", "100x50", "--out", tmp_path / "t.csv") == cli.EXIT_INPUT

    def test_missing_output_dir(self, tmp_path):
        assert run("gen", "--n", 5, "--out", tmp_path / "no" / "p.csv") == cli.EXIT_INPUT

    def test_unknown_variant(self, matrix_file, tmp_path):
        with pytest.raises(SystemExit) as err:
            run("verify", matrix_file, "--variants", "brute,warp")
        assert err.value.code == 2

    def test_normalized_needs_words(self, tmp_path):
        pts = tmp_path / "p.csv"
        run("gen", "--n", 3, "--out", pts)
        assert run("dist", pts, "--normalized", "--out", tmp_path / "m.txt") == cli.EXIT_INPUT


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fastdsom", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout
