import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spghmm.errors import DomainError
from spghmm.generator import paper_simulation_preset
from spghmm.model import PointParams, permute_states
from spghmm.stats import (
    align_states,
    confusion,
    expected_wetness,
    location_stats,
    monthly_state_distribution,
    order_by_wetness,
    per_state_stats,
    relabel,
    replicate_rmse,
    replicate_summary,
    rmse,
)

# decoded (rows) against true (columns) counts from the simulation study
STUDY_TABLE = np.array([[631, 71, 11], [50, 363, 207], [24, 162, 281]])


def sequences_from_table(table):
    true, decoded = [], []
    for d in range(table.shape[0]):
        for t in range(table.shape[1]):
            true += [t] * table[d, t]
            decoded += [d] * table[d, t]
    return np.array(true), np.array(decoded)


class TestLocationStats:
    def test_hand_values(self):
        y = np.array([[0.0, 2.0], [4.0, 0.0], [0.0, 0.0], [2.0, 6.0]])
        s = location_stats(y)
        np.testing.assert_allclose(s.dry_proportion, [0.5, 0.5])
        np.testing.assert_allclose(s.mean_intensity, [3.0, 4.0])
        assert s.n_days == 4

    def test_never_wet_is_nan(self):
        s = location_stats(np.array([[0.0, 1.0], [0.0, 0.0]]))
        assert np.isnan(s.mean_intensity[0]) and s.mean_intensity[1] == 1.0

    def test_per_state(self):
        y = np.array([[0.0], [5.0], [1.0], [0.0]])
        states = np.array([0, 0, 1, 2])
        out = per_state_stats(y, states, 4)
        assert out[0].dry_proportion[0] == 0.5 and out[0].mean_intensity[0] == 5.0
        assert out[3].n_days == 0 and np.isnan(out[3].dry_proportion[0])


class TestConfusion:
    def test_study_table(self):
        true, decoded = sequences_from_table(STUDY_TABLE)
        cm = confusion(true, decoded, K=3)
        np.testing.assert_array_equal(cm.counts, STUDY_TABLE)
        assert cm.accuracy == pytest.approx(1275 / 1800)
        assert round(cm.accuracy, 3) == 0.708
        np.testing.assert_allclose(cm.per_state_recall, [631 / 705, 363 / 596, 281 / 499])
        assert round(cm.per_state_recall[0], 3) == 0.895

    def test_with_permutation(self):
        true = np.array([0, 0, 1, 2, 2])
        cand = np.array([1, 1, 2, 0, 0])
        perm = align_states(true, cand)
        np.testing.assert_array_equal(perm, [1, 2, 0])
        assert confusion(true, cand, perm=perm).accuracy == 1.0


class TestAlignment:
    @settings(max_examples=30, deadline=None)
    @given(st.permutations([0, 1, 2]))
    def test_recovers_permutation_of_params(self, perm):
        truth = paper_simulation_preset()
        shuffled = permute_states(truth, list(perm))
        found = align_states(truth, shuffled)
        # shuffled state k is true state perm[k]
        np.testing.assert_array_equal(np.asarray(perm)[found], [0, 1, 2])
        back = permute_states(shuffled, found)
        np.testing.assert_array_equal(back.A, truth.A)

    @settings(max_examples=50, deadline=None)
    @given(st.permutations([0, 1, 2, 3]), st.integers(0, 1000))
    def test_label_sequences(self, perm, seed):
        rng = np.random.default_rng(seed)
        ref = rng.integers(0, 4, 200)
        cand = np.asarray(perm)[ref]
        found = align_states(ref, cand, K=4)
        np.testing.assert_array_equal(relabel(cand, found), ref)

    def test_too_many_states(self):
        with pytest.raises(DomainError):
            align_states(np.arange(9), np.arange(9))


class TestWetness:
    def test_order(self):
        truth = paper_simulation_preset()
        w = expected_wetness(truth)
        assert w[0] > w[1] > w[2]
        np.testing.assert_array_equal(order_by_wetness(truth), [0, 1, 2])
        shuffled = permute_states(truth, [2, 0, 1])
        np.testing.assert_array_equal(order_by_wetness(shuffled), [1, 2, 0])

    def test_hand_value(self):
        p = PointParams(pi1=[1.0], A=[[1.0]], C=[[[0.5, 0.25, 0.25]]], Lambda=[[[0.5, 2.0]]])
        assert expected_wetness(p)[0] == pytest.approx(0.25 * 2 + 0.25 * 0.5)


class TestMonthly:
    def test_columns_sum_to_100(self):
        dates = np.arange(np.datetime64("2001-07-01"), np.datetime64("2001-10-01"))
        rng = np.random.default_rng(0)
        states = rng.integers(0, 3, len(dates))
        months, table = monthly_state_distribution(states, dates, 3)
        assert months == [7, 8, 9]
        np.testing.assert_allclose(table.sum(axis=0), 100.0)
        july = states[:31]
        assert table[0, 0] == pytest.approx(100 * np.mean(july == 0))


class TestRmse:
    def test_values(self):
        assert rmse([1.0, 2.0], [1.0, 4.0]) == pytest.approx(np.sqrt(2))
        with pytest.raises(DomainError):
            rmse([1.0, np.nan], [1.0, 1.0])

    def test_replicates(self):
        reps = np.array([[0.1, 1.0], [0.3, 3.0]])
        np.testing.assert_allclose(replicate_rmse(reps, [0.2, 2.0]), [0.1, 1.0])

    def test_summary(self):
        runs = [np.array([[0.0, 1.0], [2.0, 0.0]]), np.array([[1.0, 1.0], [1.0, 1.0]])]
        s = replicate_summary(runs, quantiles=(0.5,))
        np.testing.assert_allclose(s["dry_proportion"], [[0.5, 0.5], [0.0, 0.0]])
        np.testing.assert_allclose(s["dry_quantiles"][0], [0.25, 0.25])
