import subprocess
import sys

import numpy as np
import pytest

from ugn.cli import main
from ugn.datasets import load_edge_list, load_labels, load_matrix, load_matrix_pairs


def parse(out):
    return dict(line.split("\t", 1) for line in out.strip().splitlines())


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# tiny karate run\nepochs=3\nhidden_dims=8\nlatent_dim=8\nchannels=2\nlinear_dims=8\n")
    return p


def test_train_then_eval(config, tmp_path, capsys):
    assert main(["train", "--config", str(config), "--seed", "1", "--out-dir", str(tmp_path / "r")]) == 0
    trained = parse(capsys.readouterr().out)
    assert trained["epochs"] == "3" and len(trained["config_hash"]) == 64
    assert main(["eval", "--checkpoint", str(tmp_path / "r" / "checkpoint.txt")]) == 0
    evaluated = parse(capsys.readouterr().out)
    assert evaluated == {k: v for k, v in trained.items() if k not in ("config_hash", "epochs")}
    assert (tmp_path / "r" / "metrics.txt").read_text().splitlines()[0].startswith("accuracy\t")


def test_set_override(config, capsys):
    assert main(["train", "--config", str(config), "--set", "epochs=1"]) == 0
    assert parse(capsys.readouterr().out)["epochs"] == "1"


@pytest.mark.parametrize("argv", [
    [],
    ["train"],
    ["fly"],
    ["gen", "sbm", "--out", "x"],
])
def test_bad_arguments_exit_1(argv, capsys):
    assert main(argv) == 1


def test_invalid_inputs_exit_1(config, tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["train", "--config", str(config), "--set", "epochs=-2"]) == 1
    assert "epochs" in capsys.readouterr().err
    bad = tmp_path / "ckpt"
    bad.write_text("garbage\n")
    assert main(["eval", "--checkpoint", str(bad)]) == 1
    assert main(["train", "--config", str(config), "--set", "data=fixture:nowhere"]) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_runtime_failure_exit_2(config, capsys):
    assert main(["train", "--config", str(config), "--set", "learning_rate=1e300"]) == 2
    assert "non-finite" in capsys.readouterr().err


def test_gen_sbm(tmp_path, capsys):
    out = str(tmp_path / "g.edges")
    assert main(["gen", "sbm", "--seed", "0", "--n", "30", "--communities", "3", "--out", out]) == 0
    info = parse(capsys.readouterr().out)
    g = load_edge_list(out)
    assert int(info["edges"]) == g.n_edges and g.n == 30
    assert set(load_labels(out + ".labels", 30).tolist()) == {0, 1, 2}


def test_gen_translate(tmp_path, capsys):
    out = str(tmp_path / "p.txt")
    assert main(["gen", "translate", "--seed", "0", "--order", "5", "--count", "4", "--out", out]) == 0
    assert len(load_matrix_pairs(out)) == 4


def test_features(tmp_path, capsys):
    out = str(tmp_path / "g.edges")
    main(["gen", "sbm", "--seed", "0", "--n", "20", "--communities", "2", "--out", out])
    capsys.readouterr()
    feats = str(tmp_path / "f.txt")
    assert main(["features", "supernode", "--graph", out, "--supernodes", "4", "--rand-dim", "3",
                 "--seed", "0", "--out", feats]) == 0
    assert parse(capsys.readouterr().out)["dim"] == "7"
    m = load_matrix(feats)
    assert m.shape == (20, 7) and np.all((m >= 0) & (m <= 1))


def test_deterministic_output(config, capsys):
    main(["train", "--config", str(config)])
    first = capsys.readouterr().out
    main(["train", "--config", str(config)])
    assert capsys.readouterr().out == first


def test_console_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ugn.cli", "gen", "sbm", "--seed", "0", "--n", "12",
                           "--communities", "2", "--out", str(tmp_path / "g")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("nodes\t12")
