import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ugn.metrics import MetricReport, auprc, classification_metrics, hits_at_1, pearson

from oracles import threshold_auprc


class TestClassification:
    def test_basic(self):
        assert classification_metrics([1, 0, 2], [1, 0, 2])["accuracy"] == 1.0
        assert classification_metrics([1, 0], [0, 1])["accuracy"] == 0.0
        assert classification_metrics([0, 1, 1], [0, 0, 1])["accuracy"] == pytest.approx(2 / 3)

    def test_macro_scores(self):
        rep = classification_metrics([0, 1, 1], [0, 0, 1])
        # class 0: p=1, r=1/2; class 1: p=1/2, r=1
        assert rep["precision"] == pytest.approx(0.75)
        assert rep["recall"] == pytest.approx(0.75)
        assert rep["f1"] == pytest.approx(2 / 3)

    def test_errors(self):
        with pytest.raises(ValueError):
            classification_metrics([0], [0, 1])
        with pytest.raises(ValueError):
            classification_metrics([], [])


class TestAUPRC:
    def test_perfect(self):
        assert auprc([0.9, 0.1], [1, 0]) == 1.0

    def test_reversed(self):
        s, y = [0.1, 0.9], [1, 0]
        assert auprc(s, y) == threshold_auprc(s, y) == 0.5

    def test_ties_form_one_threshold(self):
        assert auprc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5

    def test_single_class(self):
        with pytest.raises(ValueError):
            auprc([0.2, 0.3], [1, 1])

    def test_random_20_point(self):
        rng = np.random.default_rng(0)
        s, y = rng.random(20), rng.integers(0, 2, 20)
        assert abs(auprc(s, y) - threshold_auprc(s, y)) < 1e-12

    @given(st.integers(0, 2**31 - 1), st.integers(2, 60), st.booleans())
    @settings(max_examples=100, deadline=None)
    def test_matches_oracle(self, seed, n, coarse):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        s = rng.integers(0, 4, n) / 4 if coarse else rng.random(n)
        assert abs(auprc(s, y) - threshold_auprc(s, y)) < 1e-12


class TestPearson:
    def test_examples(self):
        x = np.array([1.0, 2.0, 4.0, 7.0])
        assert pearson(x, x) == pytest.approx(1.0)
        assert pearson(x, -x) == pytest.approx(-1.0)
        assert pearson(x, 2 * x + 3) == pytest.approx(1.0)

    def test_square_uses_upper_triangle(self):
        a = np.array([[9.0, 1.0, 2.0], [1.0, -9.0, 3.0], [2.0, 3.0, 0.0]])
        b = a.copy()
        np.fill_diagonal(b, [100.0, 5.0, -7.0])
        assert pearson(a, b) == pytest.approx(1.0)

    def test_degenerate(self):
        with pytest.raises(ValueError):
            pearson([1.0, 1.0], [1.0, 2.0])


class TestHits:
    def test_examples(self):
        assert hits_at_1([1, 2], [1, 2]) == 1.0
        assert hits_at_1([1, 2], [0, 0]) == 0.0
        assert hits_at_1(np.arange(10), [0, 1, 2] + [99] * 7) == pytest.approx(0.3)

    def test_empty(self):
        with pytest.raises(ValueError):
            hits_at_1([], [])


def test_report_text_round_trip():
    rep = MetricReport({"accuracy": 0.1 + 0.2, "f1": 1.0}, {"samples": 3}, seed=7)
    text = rep.to_text()
    assert text.splitlines()[0] == "accuracy\t0.30000000000000004"
    back = MetricReport.from_text(text)
    assert back == rep and back.to_text() == text
