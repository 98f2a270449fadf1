import numpy as np
import pytest

from ugn.datasets import (FormatError, Vocabulary, available_fixtures, generate_sbm,
                          generate_translation_pairs, load_edge_list, load_fixture, load_labels,
                          load_matrix, load_matrix_pairs, load_triples, save_edge_list,
                          save_labels, save_matrix, save_matrix_pairs)
from ugn.graph import build_graph


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestEdgeLists:
    def test_karate(self):
        g = load_fixture("karate")
        assert (g.n, g.n_edges, g.directed) == (34, 78, False)
        assert np.bincount(g.node_labels).tolist() == [17, 17]
        assert "karate" in available_fixtures()

    def test_unknown_fixture(self):
        with pytest.raises(KeyError):
            load_fixture("cora")

    def test_empty_edge_section(self, tmp_path):
        g = load_edge_list(write(tmp_path, "e.edges", "n=4 directed=0\n"))
        assert (g.n, g.n_edges) == (4, 0)

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        for directed in (False, True):
            g = build_graph(15, rng.integers(0, 15, size=(40, 2)), directed=directed,
                            edge_labels=rng.integers(0, 3, size=40))
            save_edge_list(g, tmp_path / "g.edges")
            assert load_edge_list(tmp_path / "g.edges") == g

    def test_errors_carry_line_numbers(self, tmp_path):
        with pytest.raises(FormatError, match="header"):
            load_edge_list(write(tmp_path, "a", "0\t1\n"))
        with pytest.raises(FormatError, match=":3:"):
            load_edge_list(write(tmp_path, "b", "n=3\n0\t1\n1 2\n"))
        with pytest.raises(IndexError, match=r"\(0, 9\)"):
            load_edge_list(write(tmp_path, "c", "n=3\n0\t9\n"))
        with pytest.raises(FormatError, match="all edges or none"):
            load_edge_list(write(tmp_path, "d", "n=3\n0\t1\t1\n1\t2\n"))

    def test_labels_round_trip(self, tmp_path):
        y = np.array([0, -1, 2, 1])
        save_labels(y, tmp_path / "y")
        assert load_labels(tmp_path / "y", 4).tolist() == y.tolist()
        with pytest.raises(IndexError):
            load_labels(write(tmp_path, "z", "7\t0\n"), 4)


class TestMatrices:
    def test_matrix_round_trip(self, tmp_path):
        m = np.random.default_rng(1).normal(size=(3, 4))
        save_matrix(m, tmp_path / "m")
        np.testing.assert_array_equal(load_matrix(tmp_path / "m"), m)

    def test_pairs_round_trip(self, tmp_path):
        pairs = generate_translation_pairs(5, 3, beta=0.5, noise=0.1, rng=0)
        save_matrix_pairs(pairs, tmp_path / "p")
        back = load_matrix_pairs(tmp_path / "p")
        assert len(back) == 3
        for a, b in zip(pairs, back):
            np.testing.assert_array_equal(a.source, b.source)
            np.testing.assert_array_equal(a.target, b.target)

    def test_pairs_errors(self, tmp_path):
        with pytest.raises(FormatError, match="truncated"):
            load_matrix_pairs(write(tmp_path, "t", "2\n1 0\n0 1\n1 0\n"))
        with pytest.raises(FormatError, match="not symmetric"):
            load_matrix_pairs(write(tmp_path, "s", "2\n1 0.5\n0 1\n1 0\n0 1\n"))
        with pytest.raises(FormatError, match="expected 2 values"):
            load_matrix_pairs(write(tmp_path, "w", "2\n1 0 3\n0 1\n1 0\n0 1\n"))


class TestTriples:
    def test_three_lines(self, tmp_path):
        t, vocab = load_triples(write(tmp_path, "t", "a\tr1\tb\nb\tr2\tc\na\tr1\tb\n"))
        assert t.shape == (3, 3)
        assert t[0].tolist() == t[2].tolist()  # duplicates kept
        assert len(vocab.entities) == 3 and len(vocab.relations) == 2

    def test_stable_ids_with_vocab(self, tmp_path):
        path = write(tmp_path, "t", "x\tr\ty\ny\tq\tz\n")
        vocab = tmp_path / "v"
        first, _ = load_triples(path, vocab)
        second, _ = load_triples(path, vocab)
        np.testing.assert_array_equal(first, second)
        assert Vocabulary.load(vocab).entities == {"x": 0, "y": 1, "z": 2}

    def test_bad_line(self, tmp_path):
        with pytest.raises(FormatError, match=":2:"):
            load_triples(write(tmp_path, "t", "a\tr\tb\na\tb\n"))
        with pytest.raises(KeyError):
            load_triples(write(tmp_path, "u", "a\tr\tb\n"), grow_relations=False)


class TestGenerators:
    def test_disjoint_cliques(self):
        g = generate_sbm(12, 3, 1.0, 0.0, rng=0)
        assert g.n_edges == 3 * 6
        y = g.node_labels
        assert all(y[u] == y[v] for u, v in g.edges)

    def test_expected_edge_count(self):
        n, k, p_in, p_out = 60, 3, 0.3, 0.05
        sizes = np.full(k, n // k)
        within = int(sum(s * (s - 1) // 2 for s in sizes))
        between = n * (n - 1) // 2 - within
        mean = within * p_in + between * p_out
        sd = np.sqrt(within * p_in * (1 - p_in) + between * p_out * (1 - p_out))
        for seed in range(20):
            assert abs(generate_sbm(n, k, p_in, p_out, rng=seed).n_edges - mean) < 3 * sd

    def test_sbm_seeded_and_validated(self):
        assert generate_sbm(30, 2, 0.4, 0.1, rng=3) == generate_sbm(30, 2, 0.4, 0.1, rng=3)
        with pytest.raises(ValueError):
            generate_sbm(30, 2, 0.1, 0.4)

    def test_tanh_of_source(self):
        for p in generate_translation_pairs(8, 4, alpha=1.0, beta=0.0, noise=0.0, rng=0):
            np.testing.assert_allclose(p.target, np.tanh(p.source), atol=1e-15)

    def test_symmetric_and_bounded(self):
        for p in generate_translation_pairs(10, 5, beta=0.5, noise=0.3, shared=0.5, population=1.0, rng=2):
            for m in (p.source, p.target):
                np.testing.assert_array_equal(m, m.T)
                assert np.abs(m).max() <= 1.0

    def test_population_term_is_shared(self):
        a = generate_translation_pairs(8, 30, population=0.0, rng=5)
        b = generate_translation_pairs(8, 30, population=2.0, rng=5)
        spread = lambda ps: np.std([p.target for p in ps], axis=0).mean()
        # same sources, and the fixed pattern pulls every target the same way
        np.testing.assert_array_equal(a[0].source, b[0].source)
        assert spread(b) < spread(a)
