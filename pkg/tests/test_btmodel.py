from __future__ import annotations

import math

import numpy as np
import numpy.testing as npt
import pytest

from teco.btmodel import (
    VoteMatrix,
    fit_bradley_terry,
    load_votes_csv,
    predict_win_prob,
)
from teco.errors import (
    DisconnectedGraphError,
    MissingFileError,
    SeparationError,
    TecoError,
)


def mm_oracle(wins: np.ndarray, iters: int = 20000,
              tol: float = 1e-13) -> np.ndarray:
    """Minorization-maximization fixed point for BT strengths (Hunter).

    pi_i <- W_i / sum_j n_ij / (pi_i + pi_j).  Independent of the Newton
    solver under test; returns log strengths anchored at item 0.
    """
    w = wins.astype(np.float64)
    n = w + w.T
    k = w.shape[0]
    pi = np.ones(k)
    total_wins = w.sum(axis=1)
    for _ in range(iters):
        denom = np.zeros(k)
        for i in range(k):
            for j in range(k):
                if i != j and n[i, j] > 0:
                    denom[i] += n[i, j] / (pi[i] + pi[j])
        new = total_wins / denom
        new = new / new[0]
        if np.max(np.abs(np.log(new) - np.log(pi))) < tol:
            pi = new
            break
        pi = new
    return np.log(pi)


def votes(items, wins):
    return VoteMatrix(items=tuple(items),
                      wins=np.asarray(wins, dtype=np.int64))


class TestVoteMatrix:
    def test_minimum_two_items(self):
        with pytest.raises(TecoError):
            votes(["a"], [[0]])

    def test_unique_names(self):
        with pytest.raises(TecoError):
            votes(["a", "a"], [[0, 1], [1, 0]])

    def test_integer_dtype_required(self):
        with pytest.raises(TecoError):
            VoteMatrix(items=("a", "b"),
                       wins=np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_non_negative(self):
        with pytest.raises(TecoError):
            votes(["a", "b"], [[0, -1], [1, 0]])

    def test_zero_diagonal(self):
        with pytest.raises(TecoError):
            votes(["a", "b"], [[1, 1], [1, 0]])

    def test_shape(self):
        with pytest.raises(TecoError):
            VoteMatrix(items=("a", "b"),
                       wins=np.zeros((2, 3), dtype=np.int64))


class TestFit:
    def test_two_item_closed_form(self):
        s, se = fit_bradley_terry(votes(["a", "b"], [[0, 3], [1, 0]]))
        assert s[0] == 0.0 and se[0] == 0.0
        npt.assert_allclose(s[1], -math.log(3.0), rtol=0, atol=1e-6)
        # observed information: n * p * (1-p) = 4 * 0.75 * 0.25
        npt.assert_allclose(se[1], 1.0 / math.sqrt(0.75), rtol=0, atol=1e-6)

    def test_two_item_smoothed_closed_form(self):
        s, _ = fit_bradley_terry(votes(["a", "b"], [[0, 3], [1, 0]]),
                                 smooth=True)
        npt.assert_allclose(s[1], math.log(1.5 / 3.5), rtol=0, atol=1e-6)

    def test_symmetric_votes_are_ties(self):
        w = [[0, 7, 7], [7, 0, 7], [7, 7, 0]]
        s, _ = fit_bradley_terry(votes(["a", "b", "c"], w))
        npt.assert_allclose(s, 0.0, rtol=0, atol=1e-9)

    def test_matches_mm_oracle(self, rng):
        for k in (3, 4, 5, 6):
            for _ in range(5):
                w = rng.integers(1, 20, size=(k, k))
                np.fill_diagonal(w, 0)
                vm = votes([f"m{i}" for i in range(k)], w)
                s, _ = fit_bradley_terry(vm)
                ref = mm_oracle(vm.wins)
                npt.assert_allclose(s, ref, rtol=0, atol=1e-4)

    def test_ranking_follows_dominance(self):
        # a beats b more than b beats a, same for b over c
        w = [[0, 9, 9], [3, 0, 9], [3, 3, 0]]
        s, _ = fit_bradley_terry(votes(["a", "b", "c"], w))
        assert s[0] > s[1] > s[2]

    def test_unanimous_sweep_raises(self):
        with pytest.raises(SeparationError, match="smoothing"):
            fit_bradley_terry(votes(["a", "b"], [[0, 5], [0, 0]]))

    def test_unanimous_sweep_smoothed_is_finite(self):
        s, se = fit_bradley_terry(votes(["a", "b"], [[0, 5], [0, 0]]),
                                  smooth=True)
        assert np.isfinite(s).all() and np.isfinite(se).all()
        assert s[1] < 0.0
        npt.assert_allclose(s[1], math.log(0.5 / 5.5), rtol=0, atol=1e-6)

    def test_never_wins_raises(self):
        w = [[0, 2, 1], [0, 0, 0], [1, 2, 0]]
        with pytest.raises(SeparationError, match="never wins"):
            fit_bradley_terry(votes(["a", "b", "c"], w))

    def test_never_loses_raises(self):
        w = [[0, 2, 1], [0, 0, 2], [0, 1, 0]]
        with pytest.raises(SeparationError, match="never loses"):
            fit_bradley_terry(votes(["a", "b", "c"], w))

    def test_isolated_item(self):
        w = [[0, 4, 0], [2, 0, 0], [0, 0, 0]]
        with pytest.raises(DisconnectedGraphError, match="no comparisons"):
            fit_bradley_terry(votes(["a", "b", "c"], w))

    def test_two_cliques(self):
        w = [
            [0, 4, 0, 0],
            [2, 0, 0, 0],
            [0, 0, 0, 3],
            [0, 0, 5, 0],
        ]
        with pytest.raises(DisconnectedGraphError, match="not reachable"):
            fit_bradley_terry(votes(["a", "b", "c", "d"], w))

    def test_anchor_and_gauge(self, rng):
        w = rng.integers(1, 10, size=(4, 4))
        np.fill_diagonal(w, 0)
        s, se = fit_bradley_terry(votes(list("abcd"), w))
        assert s[0] == 0.0
        assert se[0] == 0.0
        assert (se[1:] > 0.0).all()


class TestPredict:
    def test_probability_from_scores(self):
        s = np.array([0.0, -math.log(3.0)])
        npt.assert_allclose(predict_win_prob(s, 0, 1), 0.75, rtol=0,
                            atol=1e-9)
        npt.assert_allclose(predict_win_prob(s, 1, 0), 0.25, rtol=0,
                            atol=1e-9)

    def test_equal_scores(self):
        assert predict_win_prob(np.zeros(3), 1, 2) == 0.5

    def test_index_bounds(self):
        with pytest.raises(TecoError):
            predict_win_prob(np.zeros(2), 0, 2)

    def test_round_trip_with_fit(self):
        vm = votes(["a", "b"], [[0, 6], [2, 0]])
        s, _ = fit_bradley_terry(vm)
        npt.assert_allclose(predict_win_prob(s, 0, 1), 0.75, rtol=0,
                            atol=1e-6)


class TestCsv:
    def test_load_accumulates_and_orders(self, tmp_path):
        path = tmp_path / "votes.csv"
        path.write_text(
            "winner,loser,count\n"
            "ours,theirs,3\n"
            "theirs,ours,1\n"
            "ours,theirs,2\n"
            "baseline,ours,1\n"
            "ours,baseline,4\n"
        )
        vm = load_votes_csv(str(path))
        assert vm.items == ("ours", "theirs", "baseline")
        npt.assert_array_equal(vm.wins, [[0, 5, 4], [1, 0, 0], [1, 0, 0]])

    def test_no_header_variant(self, tmp_path):
        path = tmp_path / "votes.csv"
        path.write_text("a,b,2\nb,a,1\n")
        vm = load_votes_csv(str(path))
        assert vm.items == ("a", "b")
        npt.assert_array_equal(vm.wins, [[0, 2], [1, 0]])

    def test_self_comparison(self, tmp_path):
        path = tmp_path / "votes.csv"
        path.write_text("a,a,2\n")
        with pytest.raises(TecoError, match="self-comparison"):
            load_votes_csv(str(path))

    def test_bad_count(self, tmp_path):
        path = tmp_path / "votes.csv"
        path.write_text("a,b,2\nb,a,many\n")
        with pytest.raises(TecoError, match="bad count"):
            load_votes_csv(str(path))

    def test_negative_count(self, tmp_path):
        path = tmp_path / "votes.csv"
        path.write_text("a,b,-2\n")
        with pytest.raises(TecoError, match="negative"):
            load_votes_csv(str(path))

    def test_wrong_columns(self, tmp_path):
        path = tmp_path / "votes.csv"
        path.write_text("a,b\n")
        with pytest.raises(TecoError, match="winner,loser,count"):
            load_votes_csv(str(path))

    def test_header_only(self, tmp_path):
        path = tmp_path / "votes.csv"
        path.write_text("winner,loser,count\n")
        with pytest.raises(TecoError, match="no vote rows"):
            load_votes_csv(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFileError):
            load_votes_csv(str(tmp_path / "nope.csv"))
