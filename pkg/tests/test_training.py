import numpy as np
import pytest

from ugn.autograd import ShapeError
from ugn.datasets import FormatError, generate_sbm, save_edge_list, save_labels
from ugn.training import (Checkpoint, ConfigError, RunConfig, build_estimator, evaluate,
                          load_task_data, restore, train)

TINY = dict(hidden_dims=(8,), latent_dim=8, channels=(2,), linear_dims=(8,))


def cfg(**kw):
    return RunConfig.from_dict({**TINY, "epochs": 3, **kw})


class TestConfig:
    def test_defaults_round_trip(self, tmp_path):
        c = RunConfig()
        p = tmp_path / "c.txt"
        p.write_text("# comment\n" + c.to_text())
        assert RunConfig.from_file(p) == c
        assert RunConfig.from_file(p).hash() == c.hash()

    def test_coercion(self):
        c = RunConfig.from_dict({"hidden_dims": "16,8", "no_mtcm": "yes", "epochs": "7",
                                 "learning-rate": "0.01"})
        assert (c.hidden_dims, c.no_mtcm, c.epochs, c.learning_rate) == ((16, 8), True, 7, 0.01)

    @pytest.mark.parametrize("key,value", [("epochs", "-1"), ("learning_rate", "0"),
                                           ("task", "clustering"), ("latent_dim", "0"),
                                           ("test_fraction", "1.0"), ("precision", "float16"),
                                           ("features", "degree"), ("epochs", "ten"),
                                           ("mlp_head", "maybe")])
    def test_errors_name_field(self, key, value):
        with pytest.raises(ConfigError) as err:
            RunConfig.from_dict({key: value})
        assert err.value.field == key

    def test_unknown_key_and_bad_line(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config key"):
            RunConfig.from_dict({"dropout": 0.5})
        p = tmp_path / "c"
        p.write_text("epochs=3\njunk\n")
        with pytest.raises(ConfigError, match="line 2"):
            RunConfig.from_file(p)

    def test_overrides_copy(self):
        base = RunConfig()
        c = base.with_overrides(["epochs=5", "no_unsup_loss=1"])
        assert (c.epochs, c.no_unsup_loss) == (5, True)
        assert base.epochs == 200
        with pytest.raises(ConfigError):
            base.with_overrides(["epochs"])

    def test_hash_tracks_content(self):
        assert RunConfig().hash() == RunConfig().hash()
        assert RunConfig(seed=1).hash() != RunConfig().hash()

    def test_data_seed(self):
        assert RunConfig(seed=4).effective_data_seed == 4
        assert RunConfig(seed=4, data_seed=0).effective_data_seed == 0


class TestData:
    def test_community_labels_top_degree(self):
        d = load_task_data(cfg())
        train = d.train["y"]
        assert np.flatnonzero(train >= 0).tolist() == [0, 33]

    def test_node_class_split(self):
        d = load_task_data(cfg(task="node-class", test_fraction=0.25))
        assert (d.train["y"] >= 0).sum() == 34 - round(0.25 * 34)

    def test_link_pred_split(self):
        d = load_task_data(cfg(task="link-pred", data="sbm:n=40,communities=2,p_in=0.3,p_out=0.02"))
        held = {tuple(p) for p in d.train["exclude"].tolist()}
        assert not held & d.graph.edge_set()
        assert d.test["labels"].sum() == len(held) == len(d.test["labels"]) // 2

    def test_files(self, tmp_path):
        g = generate_sbm(20, 2, 0.5, 0.05, rng=0)
        save_edge_list(g, tmp_path / "g.edges")
        save_labels(g.node_labels, tmp_path / "g.labels")
        d = load_task_data(cfg(data=str(tmp_path / "g.edges"), labels=str(tmp_path / "g.labels")))
        assert d.graph.n == 20 and (d.train["y"] >= 0).sum() == 2
        with pytest.raises(ConfigError, match="labels"):
            load_task_data(cfg(data=str(tmp_path / "g.edges")))

    def test_translation_split(self):
        d = load_task_data(cfg(task="translation", data="translate:order=6,count=12", train_count=10))
        assert (len(d.train["pairs"]), len(d.test["pairs"])) == (10, 2)
        with pytest.raises(ConfigError, match="train_count"):
            load_task_data(cfg(task="translation", data="translate:order=6,count=12", train_count=12))

    def test_kg_triples(self, tmp_path):
        rows = [f"e{i}\tr{i % 3}\te{(i * 7) % 20}" for i in range(40)]
        (tmp_path / "kg.tsv").write_text("\n".join(rows) + "\n")
        d = load_task_data(cfg(task="kg-completion", data=str(tmp_path / "kg.tsv"), rand_dim=4))
        assert d.graph.features.shape[1] == 2 * 37 + 4
        assert len(d.test["pairs"]) == 8

    def test_ablation_switches(self):
        assert build_estimator(cfg(mlp_head=True)).head_kind == "mlp"
        assert build_estimator(cfg(no_intermediate_matrix=True)).head_kind == "mlp"
        assert build_estimator(cfg(no_unsup_loss=True)).use_unsupervised is False
        assert build_estimator(cfg(task="translation", no_mtcm=True)).use_mtcm is False
        est = build_estimator(cfg(task="link-pred", features="supernode", no_supernode=True))
        assert est.features == "random"


class TestTrain:
    def test_zero_epochs_is_initialisation(self):
        c = cfg(epochs=0)
        res = train(c)
        fresh = build_estimator(c, epochs=0)
        fresh.fit(res.estimator.graph_, load_task_data(c).train["y"])
        assert res.checkpoint.epoch == 0 and res.history == []
        for k, v in fresh.get_state().items():
            np.testing.assert_array_equal(res.checkpoint.arrays[k], v)

    def test_history_per_epoch(self):
        res = train(cfg(epochs=4))
        assert [h["epoch"] for h in res.history] == [1, 2, 3, 4]
        assert res.checkpoint.epoch == 4

    def test_checkpoint_bytes_stable(self, tmp_path):
        res = train(cfg())
        res.checkpoint.save(tmp_path / "a")
        Checkpoint.load(tmp_path / "a").save(tmp_path / "b")
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_deterministic(self, tmp_path):
        train(cfg(seed=2), out_dir=tmp_path / "x")
        train(cfg(seed=2), out_dir=tmp_path / "y")
        for name in ("checkpoint.txt", "metrics.txt", "history.tsv", "config.txt"):
            assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()

    def test_evaluate_matches_training_report(self):
        res = train(cfg(epochs=5))
        assert evaluate(res.checkpoint) == res.report
        assert evaluate(res.checkpoint) == evaluate(res.checkpoint)

    def test_restore_predicts_identically(self):
        res = train(cfg(task="translation", data="translate:order=6,count=12", train_count=10,
                        mlp_head=True))
        est, data = restore(res.checkpoint)
        src = [p.source for p in data.test["pairs"]]
        np.testing.assert_array_equal(est.predict(src), res.estimator.predict(src))

    def test_evaluate_on_other_data(self, tmp_path):
        res = train(cfg(task="link-pred", data="sbm:n=30,communities=2,p_in=0.3,p_out=0.05",
                        features="supernode", n_supernodes=3, rand_dim=2, epochs=1))
        g = generate_sbm(40, 2, 0.3, 0.05, rng=1)
        save_edge_list(g, tmp_path / "g.edges")
        assert "auprc" in evaluate(res.checkpoint, str(tmp_path / "g.edges")).values
        # identity features tie the encoder to the node count
        res = train(cfg(task="link-pred", data="sbm:n=30,communities=2,p_in=0.3,p_out=0.05",
                        epochs=1))
        with pytest.raises(ShapeError, match="does not fit"):
            evaluate(res.checkpoint, str(tmp_path / "g.edges"))

    def test_corrupt_checkpoint(self, tmp_path):
        text = train(cfg(epochs=0)).checkpoint.to_text()
        with pytest.raises(FormatError, match="hash"):
            Checkpoint.from_text(text.replace("config\tseed=0", "config\tseed=1"))
        with pytest.raises(FormatError, match="not a checkpoint"):
            Checkpoint.from_text("hello\n")

    def test_patience_stops_early(self):
        res = train(cfg(epochs=50, patience=1, learning_rate=0.5))
        assert len(res.history) < 50
        totals = [h["total"] for h in res.history]
        assert totals[-1] >= min(totals[:-1])

    def test_trained_beats_untrained_on_karate(self):
        before = train(RunConfig.from_dict({"epochs": 0})).report.values["accuracy"]
        after = train(RunConfig.from_dict({"epochs": 60})).report.values["accuracy"]
        assert after >= 0.9 and after >= before


def test_shipped_configs_match_acceptance_runs():
    from pathlib import Path

    from test_acceptance import LINK_CFG, TRANSLATE_CFG
    root = Path(__file__).resolve().parents[1] / "configs"
    assert RunConfig.from_file(root / "karate.cfg") == RunConfig()
    assert RunConfig.from_file(root / "link_sbm.cfg") == RunConfig.from_dict(LINK_CFG)
    assert RunConfig.from_file(root / "translation.cfg") == RunConfig.from_dict(TRANSLATE_CFG)
