import csv
import json

import pytest

from fairclust.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def cliques(tmp_path):
    edges = tmp_path / "cliques.edges"
    lines = [f"{u} {v}" for base in (0, 4) for u in range(base, base + 4) for v in range(u + 1, base + 4)]
    edges.write_text("\n".join(lines) + "\n")
    groups = tmp_path / "cliques.groups"
    groups.write_text("a\nb\n" * 4)
    pure = tmp_path / "pure.groups"
    pure.write_text("a\n" * 4 + "b\n" * 4)
    return edges, groups, pure


@pytest.fixture
def sbm(tmp_path):
    out = tmp_path / "data"
    assert run("generate", "--n", 60, "--k", 3, "--g", 2, "--p-in", 0.5, "--seed", 4, "--out", out) == 0
    return out / "sbm"


def suffixed(prefix, ext):
    return prefix.with_name(prefix.name + ext)


class TestGenerate:
    def test_files_and_determinism(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("generate", "--n", 200, "--k", 5, "--g", 5, "--seed", 1, "--out", out) == 0
        printed = capsys.readouterr().out.split()
        assert len(printed) == 8
        names = sorted(p.name for p in a.iterdir())
        assert names == ["sbm.edges", "sbm.groups", "sbm.json", "sbm.truth.csv"]
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_indivisible(self, tmp_path, capsys):
        assert run("generate", "--n", 7, "--k", 2, "--out", tmp_path) == 2
        assert "n must be divisible by k" in capsys.readouterr().err

    def test_missing_required(self, tmp_path):
        assert run("generate", "--k", 2, "--out", tmp_path) == 2


class TestCluster:
    def test_two_cliques_modularity(self, cliques, tmp_path):
        edges, groups, _ = cliques
        out = tmp_path / "run"
        assert run("cluster", "--edges", edges, "--groups", groups, "--k", 2, "--out", out) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["modularity"] == pytest.approx(0.5, abs=1e-12)
        manifest = json.loads((out / "manifest.json").read_text())
        for key in ("seed", "k", "lambda", "iterations", "final_loss", "wall_time_ms", "tolerance", "version"):
            assert key in manifest

    def test_lambda_zero_matches_no_reg(self, sbm, tmp_path):
        common = ["cluster", "--edges", suffixed(sbm, ".edges"), "--groups", suffixed(sbm, ".groups"),
                  "--k", 3, "--seed", 9]
        assert run(*common, "--lambda", 0, "--out", tmp_path / "a") == 0
        assert run(*common, "--no-reg", "--out", tmp_path / "b") == 0
        assert (tmp_path / "a/membership.csv").read_bytes() == (tmp_path / "b/membership.csv").read_bytes()

    def test_dump_factors(self, sbm, tmp_path):
        out = tmp_path / "run"
        assert run("cluster", "--edges", suffixed(sbm, ".edges"), "--groups", suffixed(sbm, ".groups"),
                   "--k", 3, "--dump-factors", "--dump-contrastive", "--out", out) == 0
        H = list(csv.reader((out / "H.csv").open()))
        W = list(csv.reader((out / "W.csv").open()))
        assert (len(H), len(H[0])) == (60, 3)
        assert (len(W), len(W[0])) == (3, 3)
        assert len(list(csv.reader((out / "L.csv").open()))) == 60

    def test_numerical_abort(self, cliques, tmp_path, capsys):
        edges, _, pure = cliques
        code = run("cluster", "--edges", edges, "--groups", pure, "--k", 2, "--lambda", 50, "--out", tmp_path)
        assert code == 3
        assert "numerical abort" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        code = run("cluster", "--edges", tmp_path / "nope.edges", "--groups", tmp_path / "nope.groups",
                   "--k", 2, "--out", tmp_path)
        assert code == 4

    def test_bad_edge_file(self, tmp_path, cliques):
        _, groups, _ = cliques
        bad = tmp_path / "bad.edges"
        bad.write_text("0 1\n2 2\n")
        assert run("cluster", "--edges", bad, "--groups", groups, "--k", 2, "--out", tmp_path) == 2

    def test_negative_lambda(self, cliques, tmp_path):
        edges, groups, _ = cliques
        assert run("cluster", "--edges", edges, "--groups", groups, "--k", 2, "--lambda", -1,
                   "--out", tmp_path) == 2

    def test_config_file_and_override(self, cliques, tmp_path):
        edges, groups, _ = cliques
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"# solver run\nedges = {edges}\ngroups = {groups}\nk = 2\nseed = 3\nmax_iters = 5\n")
        assert run("cluster", "--config", cfg, "--out", tmp_path / "a") == 0
        manifest = json.loads((tmp_path / "a/manifest.json").read_text())
        assert manifest["seed"] == 3 and manifest["iterations"] <= 5
        assert run("cluster", "--config", cfg, "--seed", 8, "--out", tmp_path / "b") == 0
        assert json.loads((tmp_path / "b/manifest.json").read_text())["seed"] == 8

    def test_config_unknown_key(self, cliques, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"k": 2, "colour": "red"}))
        assert run("cluster", "--config", cfg) == 2


class TestMetrics:
    def test_matches_cluster_output(self, sbm, tmp_path):
        out = tmp_path / "run"
        inputs = ["--edges", suffixed(sbm, ".edges"), "--groups", suffixed(sbm, ".groups"),
                  "--truth", suffixed(sbm, ".truth.csv")]
        assert run("cluster", *inputs, "--k", 3, "--out", out) == 0
        assert run("metrics", *inputs, "--membership", out / "membership.csv", "--k", 3,
                   "--out", tmp_path / "m.json") == 0
        assert (tmp_path / "m.json").read_bytes() == (out / "metrics.json").read_bytes()

    def test_truth_scores_one(self, sbm, capsys):
        truth = suffixed(sbm, ".truth.csv")
        assert run("metrics", "--edges", suffixed(sbm, ".edges"), "--groups", suffixed(sbm, ".groups"),
                   "--truth", truth, "--membership", truth) == 0
        assert json.loads(capsys.readouterr().out)["accuracy"] == 1.0

    def test_one_cluster(self, cliques, tmp_path, capsys):
        edges, groups, _ = cliques
        membership = tmp_path / "one.csv"
        membership.write_text("node,cluster\n" + "".join(f"{i},0\n" for i in range(8)))
        assert run("metrics", "--edges", edges, "--groups", groups, "--membership", membership,
                   "--k", 2) == 0
        assert json.loads(capsys.readouterr().out)["modularity"] == pytest.approx(0.0, abs=1e-15)

    def test_length_mismatch(self, cliques, tmp_path):
        edges, groups, _ = cliques
        membership = tmp_path / "short.csv"
        membership.write_text("node,cluster\n0,0\n1,1\n")
        assert run("metrics", "--edges", edges, "--groups", groups, "--membership", membership) == 2


class TestValidate:
    def test_ok(self, cliques, capsys):
        assert run("validate", "--edges", cliques[0]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["components"] == 2 and report["symmetric"]

    def test_matrix_asymmetric(self, tmp_path, capsys):
        m = tmp_path / "m.csv"
        m.write_text("0,1\n0,0\n")
        assert run("validate", "--matrix", m) == 2
        assert not json.loads(capsys.readouterr().out)["symmetric"]


class TestSweep:
    def test_outputs(self, sbm, tmp_path, capsys):
        out = tmp_path / "sweep"
        code = run("sweep", "--edges", suffixed(sbm, ".edges"), "--groups", suffixed(sbm, ".groups"),
                   "--k-grid", "2,3", "--lambda-grid", "0", "--repeats", 2, "--out", out, "--svg")
        assert code == 0
        rows = list(csv.DictReader((out / "sweep.csv").open()))
        assert len(rows) == 2 * 1 * 2 + 2 * 2
        summary = json.loads((out / "summary.json").read_text())
        assert summary["best_lambda"] == {"2": 0.0, "3": 0.0}
        assert (out / "twin_k3.svg").exists()
        assert "lambda* = 0.0" in capsys.readouterr().out

    def test_group_pure_blocks_gain_balance(self, tmp_path):
        data = tmp_path / "pure"
        assert run("generate", "--n", 100, "--k", 2, "--g", 2, "--seed", 1, "--aligned-groups",
                   "--out", data) == 0
        out = tmp_path / "sweep"
        assert run("sweep", "--edges", data / "sbm.edges", "--groups", data / "sbm.groups",
                   "--k", 2, "--lambda-grid", "0,1,2,5,10", "--repeats", 3, "--out", out) == 0
        chart = list(csv.DictReader((out / "twin_k2.csv").open()))
        assert float(chart[-1]["B"]) >= float(chart[0]["B"])

    def test_deterministic_rerun(self, sbm, tmp_path):
        args = ["sweep", "--edges", suffixed(sbm, ".edges"), "--groups", suffixed(sbm, ".groups"),
                "--k", 3, "--lambda-grid", "0,1", "--repeats", 2, "--deterministic"]
        assert run(*args, "--out", tmp_path / "a") == 0
        assert run(*args, "--out", tmp_path / "b") == 0
        for name in ("sweep.csv", "twin_k3.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
