import os
import subprocess
import sys

import numpy as np
import pytest

from attrwalk.cli import main
from attrwalk.embedder import load_embeddings
from attrwalk.graph import write_edge_list
from attrwalk.synthetic import planted_partition

SMALL = ["--walks-per-node", "2", "--walk-length", "20", "--dim", "8", "--window", "4", "--epochs", "1"]


@pytest.fixture
def graphs(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    write_edge_list(planted_partition([30, 30], 0.3, 0.03, seed=1), a)
    write_edge_list(planted_partition([40, 40], 0.25, 0.03, seed=2), b)
    return a, b


def run_cli(*argv):
    return main([str(x) for x in argv])


def test_stages_chain(tmp_path, graphs):
    g, _ = graphs
    d = tmp_path
    assert run_cli("features", "--graph", g, "--out", d / "x.csv") == 0
    assert (d / "x.csv").read_text().startswith("id,degree,triangle_count,wedge_count")
    assert run_cli("split", "--graph", g, "--out", d / "split", "--seed", 3) == 0
    train = d / "split" / "train.txt"
    assert run_cli("fit-phi", "--graph", train, "--out", d / "phi.txt") == 0
    assert run_cli("assign", "--graph", train, "--typemap", d / "phi.txt", "--out", d / "types.txt") == 0
    assert len((d / "types.txt").read_text().splitlines()) == 60
    assert run_cli("walks", "--graph", train, "--typemap", d / "phi.txt", "--walks-per-node", 2,
                   "--walk-length", 10, "--out", d / "walks.txt") == 0
    assert run_cli("embed", "--corpus", d / "walks.txt", "--dim", 8, "--epochs", 1, "--out", d / "emb.txt") == 0
    assert run_cli("linkpred", "--split", d / "split", "--emb", d / "emb.txt", "--typemap", d / "phi.txt",
                   "--clf-epochs", 10, "--out", d / "lp.txt") == 0
    auc = float((d / "lp.txt").read_text().splitlines()[0].split("=")[1])
    assert 0.0 <= auc <= 1.0


def test_node_walks_and_linkpred(tmp_path, graphs):
    g, _ = graphs
    d = tmp_path
    assert run_cli("split", "--graph", g, "--out", d / "split") == 0
    assert run_cli("walks", "--graph", d / "split" / "train.txt", "--walks-per-node", 2, "--walk-length", 10,
                   "--out", d / "walks.txt") == 0
    assert (d / "walks.txt").read_text().startswith("# token_space=node_ids vocab_size=60")
    assert run_cli("embed", "--corpus", d / "walks.txt", "--dim", 8, "--epochs", 1, "--out", d / "emb.txt") == 0
    assert run_cli("linkpred", "--split", d / "split", "--emb", d / "emb.txt", "--clf-epochs", 5) == 0


def test_run_writes_artifacts_and_is_reproducible(tmp_path, graphs, capsys):
    g, _ = graphs
    args = ["run", "--graph", g, "--mode", "attributed", "--phi", "log", "--bins", 8, "--seed", 1, *SMALL]
    assert run_cli(*args, "--out", tmp_path / "r1") == 0
    assert run_cli(*args, "--out", tmp_path / "r2") == 0
    for name in ("report.txt", "results.csv", "embeddings.txt", "typemap.txt", "split/meta.txt"):
        assert (tmp_path / "r1" / name).exists()
    assert (tmp_path / "r1" / "report.txt").read_bytes() == (tmp_path / "r2" / "report.txt").read_bytes()
    assert capsys.readouterr().out.startswith("auc=")


def test_transfer(tmp_path, graphs, capsys):
    a, b = graphs
    assert run_cli("run", "--graph", a, "--out", tmp_path / "train", *SMALL) == 0
    out = tmp_path / "b_vectors.txt"
    assert run_cli("transfer", "--phi", tmp_path / "train" / "typemap.txt", "--emb",
                   tmp_path / "train" / "embeddings.txt", "--graph", b, "--out", out, "--evaluate",
                   "--clf-epochs", 10) == 0
    e = load_embeddings(out, token_space="node_ids")
    assert e.input_vectors.shape == (80, 8)
    assert np.all(np.isfinite(e.input_vectors))
    assert "auc=" in capsys.readouterr().out


def test_transfer_reports_missing_types(tmp_path, graphs, capsys):
    a, _ = graphs
    assert run_cli("run", "--graph", a, "--out", tmp_path / "train", *SMALL) == 0
    # a graph with a hub far beyond anything seen in training
    hub = tmp_path / "hub.txt"
    hub.write_text("".join(f"0 {i}\n" for i in range(1, 400)))
    args = ["transfer", "--phi", tmp_path / "train" / "typemap.txt", "--emb", tmp_path / "train" / "embeddings.txt",
            "--graph", hub, "--out", tmp_path / "hub_vec.txt"]
    assert run_cli(*args) == 0
    assert "warning code=coverage missing_types=" in capsys.readouterr().err
    assert run_cli(*args, "--unseen", "error") == 7
    assert "code=coverage" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path, capsys):
    assert run_cli("features", "--graph", tmp_path / "nope.txt", "--out", tmp_path / "x.csv") == 3
    err = capsys.readouterr().err.strip().splitlines()
    assert err[-1].startswith("attrwalk: error code=input stage=features")


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n1\n")
    assert run_cli("features", "--graph", bad, "--out", tmp_path / "x.csv") == 4
    assert "line 2" in capsys.readouterr().err


def test_split_error_exit_code(tmp_path):
    star = tmp_path / "star.txt"
    star.write_text("".join(f"0 {i}\n" for i in range(1, 20)))
    assert run_cli("run", "--graph", star, "--out", tmp_path / "o", *SMALL) == 6


def test_unknown_flag_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["run", "--graph", "g.txt", "--no-such-flag"])
    assert info.value.code == 2


def _cli(*argv, cwd=None):
    env = dict(os.environ, PYTHONPATH=os.pathsep.join(sys.path))
    return subprocess.run([sys.executable, "-m", "attrwalk", *map(str, argv)], capture_output=True, text=True,
                          cwd=cwd, env=env)


def test_help_lists_defaults_and_exit_codes():
    out = _cli("run", "--help")
    assert out.returncode == 0
    for flag in ("--walks-per-node", "--walk-length", "--dim", "--window", "--negatives", "--bins", "--seed",
                 "--threads", "--operator", "--test-fraction"):
        assert flag in out.stdout
    assert "(default: 10)" in out.stdout and "(default: 128)" in out.stdout and "(default: mean)" in out.stdout
    assert "exit codes" in out.stdout
    top = _cli("--help").stdout
    for cmd in ("features", "fit-phi", "assign", "walks", "embed", "linkpred", "run", "transfer"):
        assert cmd in top


def test_fresh_directory_subprocess(tmp_path, graphs):
    g, _ = graphs
    out = _cli("run", "--graph", g, "--out", "res", *SMALL, cwd=tmp_path)
    assert out.returncode == 0, out.stderr
    assert out.stdout.startswith("auc=")
    assert "config" in out.stderr  # resolved configuration logged
    bad = _cli("run", "--bogus", cwd=tmp_path)
    assert bad.returncode == 2
