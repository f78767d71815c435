import numpy as np
import pytest
from hypothesis import given, strategies as st

from topoefm.errors import ParameterError
from topoefm.graph import _pair_from_index, dump_edgelist, generate_er, load_edgelist


def test_near_one_probability_gives_complete_graph():
    g = generate_er(4, 1 - 1e-15, 3)
    assert g.edge_count == 6
    g.check_invariants()


def test_edge_count_matches_binomial_at_paper_size():
    g = generate_er(10_000, 0.001, 12)
    n_pairs = 10_000 * 9_999 // 2
    mean, sd = n_pairs * 0.001, np.sqrt(n_pairs * 0.001 * 0.999)
    assert abs(g.edge_count - mean) < 4 * sd
    assert abs(g.degree.mean() - 10) < 0.2


def test_replay_same_seed():
    a, b = generate_er(5, 0.5, 99), generate_er(5, 0.5, 99)
    assert np.array_equal(a.edges(), b.edges())


@given(st.integers(2, 40), st.floats(0.01, 0.9), st.integers(0, 2**32))
def test_invariants_hold(K, p, seed):
    generate_er(K, p, seed).check_invariants()


@given(st.integers(2, 60))
def test_pair_decoding_matches_enumeration(K):
    pairs = [(i, j) for i in range(K) for j in range(i + 1, K)]
    i, j = _pair_from_index(np.arange(len(pairs)), K)
    assert list(zip(i.tolist(), j.tolist())) == pairs


def test_pair_frequencies_are_uniform():
    # each of the 15 pairs should appear with frequency p
    K, p, reps = 6, 0.3, 3000
    counts = np.zeros((K, K))
    for s in range(reps):
        for i, j in generate_er(K, p, s).edges():
            counts[i, j] += 1
    freq = counts[np.triu_indices(K, 1)] / reps
    assert np.all(np.abs(freq - p) < 4 * np.sqrt(p * (1 - p) / reps))


@pytest.mark.parametrize("K,p", [(1, 0.5), (5, 0.0), (5, 1.0), (5, -0.1)])
def test_bad_parameters(K, p):
    with pytest.raises(ParameterError):
        generate_er(K, p, 0)


def test_edgelist_round_trip(tmp_path):
    g = generate_er(50, 0.1, 4)
    dump_edgelist(g, tmp_path / "g.txt")
    first = (tmp_path / "g.txt").read_text().splitlines()[0]
    assert first.split() == ["50", "0.1", "4"]
    h = load_edgelist(tmp_path / "g.txt")
    assert np.array_equal(h.edges(), g.edges()) and h.node_count == 50


def test_edgelist_rejects_unordered_rows(tmp_path):
    (tmp_path / "bad.txt").write_text("3 0.5 1\n2 1\n")
    with pytest.raises(ParameterError):
        load_edgelist(tmp_path / "bad.txt")
