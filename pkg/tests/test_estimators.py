import numpy as np
import pytest
from sklearn.base import clone

from ugn.autograd import ShapeError
from ugn.datasets import generate_sbm, generate_translation_pairs, load_fixture
from ugn.estimators import UGNEdgeClassifier, UGNLinkPredictor, UGNNodeClassifier, UGNTranslator
from ugn.graph import build_graph

SMALL = dict(hidden_dims=(8,), latent_dim=8, channels=(2,), linear_dims=(8,))


def one_label_per_class(g):
    y = np.full(g.n, -1)
    for c in np.unique(g.node_labels):
        members = np.flatnonzero(g.node_labels == c)
        y[members[0]] = c
    return y


@pytest.fixture(scope="module")
def karate():
    return load_fixture("karate")


class TestNodeClassifier:
    def test_params_and_clone(self):
        est = UGNNodeClassifier(latent_dim=7, use_unsupervised=False)
        assert est.get_params()["latent_dim"] == 7
        c = clone(est)
        assert c.get_params() == est.get_params() and c is not est

    def test_fit_shapes(self, karate):
        est = UGNNodeClassifier(epochs=3, **SMALL).fit(karate, one_label_per_class(karate))
        proba = est.predict_proba()
        assert proba.shape == (34, 2)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0)
        assert set(est.predict().tolist()) <= {0, 1}
        assert [h["epoch"] for h in est.history_] == [1, 2, 3]
        assert {"supervised", "unsupervised", "total"} <= set(est.history_[0])

    def test_unsupervised_off_is_zero(self, karate):
        est = UGNNodeClassifier(epochs=2, use_unsupervised=False, **SMALL)
        est.fit(karate, one_label_per_class(karate))
        assert all(h["unsupervised"] == 0.0 for h in est.history_)

    def test_partial_fit_matches_fit(self, karate):
        y = one_label_per_class(karate)
        a = UGNNodeClassifier(epochs=4, **SMALL).fit(karate, y)
        b = UGNNodeClassifier(epochs=1, **SMALL).fit(karate, y).partial_fit(3)
        for k, v in a.get_state().items():
            np.testing.assert_array_equal(v, b.get_state()[k])

    def test_learns_two_block_sbm(self):
        # the summed smoothness term swamps two labels on a 270-edge graph, so supervised only here
        g = generate_sbm(60, 2, 0.3, 0.02, rng=0)
        est = UGNNodeClassifier(epochs=60, use_unsupervised=False).fit(g, one_label_per_class(g))
        assert est.score(g, g.node_labels) >= 0.9

    def test_wrong_width_features(self, karate):
        est = UGNNodeClassifier(epochs=0, **SMALL).fit(karate, one_label_per_class(karate))
        est.features_ = est.features_[:, :5]
        with pytest.raises(ShapeError, match="feature width 5"):
            est.predict()

    def test_other_graph_size(self, karate):
        est = UGNNodeClassifier(epochs=0, **SMALL).fit(karate, one_label_per_class(karate))
        with pytest.raises(ShapeError):
            est.predict(build_graph(10, [(0, 1)]))

    def test_no_labels(self, karate):
        with pytest.raises(ValueError, match="no labelled"):
            UGNNodeClassifier(**SMALL).fit(karate, np.full(34, -1))

    def test_bad_params(self, karate):
        y = one_label_per_class(karate)
        with pytest.raises(ValueError):
            UGNNodeClassifier(head_kind="lstm", **SMALL).fit(karate, y)
        with pytest.raises(ValueError):
            UGNNodeClassifier(learning_rate=0, **SMALL).fit(karate, y)
        with pytest.raises(ValueError):
            UGNNodeClassifier(features="pagerank", **SMALL).fit(karate, y)

    def test_set_state_shape_error_names_parameter(self, karate):
        y = one_label_per_class(karate)
        est = UGNNodeClassifier(epochs=0, **SMALL).fit(karate, y)
        state = est.get_state()
        state["encoder.0"] = np.zeros((3, 3))
        with pytest.raises(ShapeError, match="encoder.0"):
            UGNNodeClassifier(epochs=0, **SMALL).fit(karate, y).set_state(state)

    def test_state_round_trip(self, karate):
        y = one_label_per_class(karate)
        a = UGNNodeClassifier(epochs=3, **SMALL).fit(karate, y)
        b = UGNNodeClassifier(epochs=0, **SMALL).fit(karate, y)
        b.set_state(a.get_state())
        np.testing.assert_array_equal(a.predict_proba(), b.predict_proba())
        a.partial_fit(1)
        b.partial_fit(1)
        np.testing.assert_array_equal(a.predict_proba(), b.predict_proba())

    def test_mlp_head(self, karate):
        est = UGNNodeClassifier(epochs=2, head_kind="mlp", **SMALL)
        assert est.fit(karate, one_label_per_class(karate)).predict_proba().shape == (34, 2)

    def test_float32(self, karate):
        est = UGNNodeClassifier(epochs=2, precision="float32", **SMALL)
        est.fit(karate, one_label_per_class(karate))
        assert est.get_state()["encoder.0"].dtype == np.float32


class TestEdgeModels:
    def test_edge_classifier(self):
        g = generate_sbm(30, 2, 0.5, 0.05, rng=1)
        y = g.node_labels
        pairs = g.edges
        labels = (y[pairs[:, 0]] == y[pairs[:, 1]]).astype(int)
        est = UGNEdgeClassifier(epochs=2, batch_size=16, features="supernode", n_supernodes=3,
                                rand_dim=2, **SMALL).fit(g, pairs, labels)
        assert est.predict_proba(pairs).shape == (len(pairs), len(est.classes_))
        assert 0.0 <= est.score(pairs, labels) <= 1.0

    def test_edge_label_count_mismatch(self):
        g = build_graph(4, [(0, 1), (1, 2)])
        with pytest.raises(ValueError, match="labels"):
            UGNEdgeClassifier(**SMALL).fit(g, g.edges, [0])
        with pytest.raises(IndexError):
            UGNEdgeClassifier(**SMALL).fit(g, [(0, 9)], [1])

    def test_link_predictor_smoke(self):
        g = generate_sbm(40, 2, 0.4, 0.02, rng=2)
        est = UGNLinkPredictor(epochs=3, n_supernodes=4, rand_dim=2, learning_rate=0.001, **SMALL)
        est.fit(g, exclude=[(0, 1)])
        p = est.predict_proba([(0, 1), (0, 39)])
        assert p.shape == (2,) and ((p >= 0) & (p <= 1)).all()
        assert set(est.predict([(0, 1)]).tolist()) <= {0, 1}
        assert 0.0 < est.score([(0, 1), (0, 39)], [1, 0]) <= 1.0

    def test_given_features_required(self):
        with pytest.raises(ValueError):
            UGNEdgeClassifier(features="given", **SMALL).fit(build_graph(3, [(0, 1)]), [(0, 1)], [1])


class TestTranslator:
    @pytest.fixture
    def pairs(self):
        return generate_translation_pairs(8, 24, beta=0.5, noise=0.05, rng=0)

    def test_symmetric_predictions(self, pairs):
        est = UGNTranslator(epochs=2, head_kind="mlp", batch_size=8, **SMALL).fit(pairs[:20])
        out = est.predict(pairs[20:])
        assert out.shape == (4, 8, 8)
        np.testing.assert_array_equal(out, np.transpose(out, (0, 2, 1)))
        assert np.abs(out).max() <= 1.0

    def test_mtcm_off_uses_zero_mean(self, pairs):
        est = UGNTranslator(epochs=0, use_mtcm=False, head_kind="mlp", **SMALL).fit(pairs)
        assert not est.mtcm_.mean.any()
        on = UGNTranslator(epochs=0, head_kind="mlp", **SMALL).fit(pairs)
        np.testing.assert_allclose(on.mtcm_.mean, np.mean([p.target for p in pairs], axis=0))

    def test_training_lowers_loss(self, pairs):
        est = UGNTranslator(epochs=15, head_kind="mlp", batch_size=8, **SMALL).fit(pairs)
        assert est.history_[-1]["total"] < est.history_[0]["total"]

    def test_conv_head_runs(self, pairs):
        est = UGNTranslator(epochs=1, batch_size=12, **SMALL).fit(pairs[:12])
        assert np.isfinite(est.score(pairs[12:]))

    def test_shape_and_order_checks(self, pairs):
        est = UGNTranslator(epochs=0, head_kind="mlp", **SMALL).fit(pairs)
        with pytest.raises(ShapeError):
            est.predict([np.eye(5)])
        mixed = pairs[:2] + generate_translation_pairs(5, 1, rng=0)
        with pytest.raises(ValueError, match="order"):
            UGNTranslator(**SMALL).fit(mixed)
        with pytest.raises(ValueError):
            UGNTranslator(**SMALL).fit([])

    def test_state_carries_mtcm(self, pairs):
        a = UGNTranslator(epochs=2, head_kind="mlp", **SMALL).fit(pairs)
        b = UGNTranslator(epochs=0, head_kind="mlp", **SMALL).fit(pairs[:3])
        b.set_state(a.get_state())
        np.testing.assert_array_equal(a.predict(pairs[:2]), b.predict(pairs[:2]))


def test_determinism(karate):
    y = one_label_per_class(karate)
    a = UGNNodeClassifier(epochs=5, random_state=3, **SMALL).fit(karate, y)
    b = UGNNodeClassifier(epochs=5, random_state=3, **SMALL).fit(karate, y)
    c = UGNNodeClassifier(epochs=5, random_state=4, **SMALL).fit(karate, y)
    np.testing.assert_array_equal(a.predict_proba(), b.predict_proba())
    assert not np.array_equal(a.predict_proba(), c.predict_proba())
