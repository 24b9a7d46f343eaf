import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from steelprop.dataset import Sample, assign_folds
from steelprop.errors import ValidationError
from steelprop.evalstat import (EvalReport, FoldFitError, ScoreMatrix,
                                bonferroni_critical_difference,
                                bonferroni_pairwise, cross_validate, eqm,
                                friedman, r_square)

from conftest import REFERENCE_FAMILIES, REFERENCE_FOLD_SCORES


class TestMetrics:
    def test_perfect_prediction(self):
        assert r_square([1, 2, 3], [1, 2, 3]) == 1.0
        assert eqm([1, 2, 3], [1, 2, 3]) == 0.0

    def test_predicting_the_mean_scores_zero(self):
        assert r_square([1, 2, 3], [2, 2, 2]) == 0.0
        assert eqm([1, 2, 3], [2, 2, 2]) == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_hand_computed_case(self):
        t = [100.0, 200.0, 300.0]
        y = [110.0, 190.0, 310.0]
        # SQres = 300, SQtot = 20000
        assert r_square(t, y) == pytest.approx(0.985, abs=1e-12)
        assert eqm(t, y) == pytest.approx(100.0, abs=1e-12)

    def test_negative_r2_reported_as_is(self):
        assert r_square([1.0, 2.0, 3.0], [10.0, -10.0, 10.0]) < 0.0

    def test_identical_targets_error(self):
        with pytest.raises(ValidationError, match="SQtot"):
            r_square([5.0, 5.0, 5.0], [1.0, 2.0, 3.0])

    def test_r2_eqm_consistency(self, rng):
        for _ in range(20):
            t = rng.normal(size=17)
            y = rng.normal(size=17)
            sq_tot = float(np.sum((t - t.mean()) ** 2))
            lhs = r_square(t, y)
            rhs = 1.0 - eqm(t, y) * len(t) / sq_tot
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestFriedman:
    def test_all_identical_scores(self):
        sm = ScoreMatrix(values=np.ones((6, 4)), treatments=("a", "b", "c", "d"))
        res = friedman(sm)
        assert np.allclose(res.mean_ranks, 2.5)
        assert res.statistic == 0.0
        assert res.p_value == pytest.approx(1.0)

    def test_strict_order_hand_computed(self):
        # A > B > C in every one of 4 blocks: ranks (1, 2, 3), chi2 = 8
        sm = ScoreMatrix(values=np.tile([3.0, 2.0, 1.0], (4, 1)),
                         treatments=("A", "B", "C"))
        res = friedman(sm)
        assert list(res.mean_ranks) == [1.0, 2.0, 3.0]
        assert res.statistic == pytest.approx(8.0, abs=1e-12)
        assert res.df == 2

    def test_reference_scores_rank_fixture(self):
        sm = ScoreMatrix(values=REFERENCE_FOLD_SCORES,
                         treatments=REFERENCE_FAMILIES)
        res = friedman(sm)
        assert list(res.mean_ranks) == [2.4, 1.0, 2.6, 4.0]
        assert res.statistic == pytest.approx(27.12, abs=0.01)
        assert res.p_value < 1e-5

    def test_matches_scipy_oracle(self, rng):
        for _ in range(10):
            scores = rng.normal(size=(8, 5))
            sm = ScoreMatrix(values=scores, treatments=tuple("abcde"))
            res = friedman(sm)
            ref_stat, ref_p = scipy.stats.friedmanchisquare(*scores.T)
            assert res.statistic == pytest.approx(ref_stat, rel=1e-12)
            assert res.p_value == pytest.approx(ref_p, rel=1e-9)

    def test_mean_ranks_sum(self, rng):
        scores = rng.normal(size=(7, 6))
        res = friedman(ScoreMatrix(values=scores, treatments=tuple("abcdef")))
        k = 6
        assert float(np.sum(res.mean_ranks)) == pytest.approx(k * (k + 1) / 2)

    def test_block_permutation_invariance(self, rng):
        scores = rng.normal(size=(9, 4))
        perm = rng.permutation(9)
        a = friedman(ScoreMatrix(values=scores, treatments=tuple("abcd")))
        b = friedman(ScoreMatrix(values=scores[perm], treatments=tuple("abcd")))
        assert a.statistic == b.statistic
        assert np.array_equal(a.mean_ranks, b.mean_ranks)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_rank_invariance_under_monotone_transform(self, seed):
        rng = np.random.default_rng(seed)
        scores = rng.normal(size=(6, 4))
        transformed = np.exp(3.0 * scores) + 1.0    # strictly increasing
        a = friedman(ScoreMatrix(values=scores, treatments=tuple("abcd")))
        b = friedman(ScoreMatrix(values=transformed, treatments=tuple("abcd")))
        assert np.array_equal(a.mean_ranks, b.mean_ranks)
        assert a.statistic == b.statistic
        da = bonferroni_pairwise(a)
        db = bonferroni_pairwise(b)
        assert [d.significant for d in da] == [d.significant for d in db]

    def test_ties_get_average_ranks(self):
        sm = ScoreMatrix(values=np.array([[1.0, 1.0, 0.0]] * 3),
                         treatments=("a", "b", "c"))
        res = friedman(sm)
        assert list(res.mean_ranks) == [1.5, 1.5, 3.0]

    def test_lower_is_better_orientation(self):
        scores = np.tile([1.0, 2.0, 3.0], (4, 1))
        res = friedman(ScoreMatrix(values=scores, treatments=("a", "b", "c"),
                                   higher_is_better=False))
        assert list(res.mean_ranks) == [1.0, 2.0, 3.0]

    def test_degenerate_errors(self):
        with pytest.raises(ValidationError):
            friedman(ScoreMatrix(values=np.ones((1, 3)), treatments=("a", "b", "c")))


class TestBonferroni:
    def test_critical_difference_value(self):
        # z at 1 - 0.05/12 times sqrt(20/60)
        cd = bonferroni_critical_difference(k=4, n=10, alpha=0.05)
        assert cd == pytest.approx(1.382, abs=0.002)

    def test_reference_scores_decisions(self):
        sm = ScoreMatrix(values=REFERENCE_FOLD_SCORES,
                         treatments=REFERENCE_FAMILIES)
        res = friedman(sm)
        decisions = {d.pair: d for d in bonferroni_pairwise(res, alpha=0.05)}
        svr_lr = decisions[("svr", "linear")]
        assert svr_lr.rank_difference == pytest.approx(3.0, abs=1e-12)
        assert svr_lr.significant
        nn_dt = decisions[("nn", "tree")]
        assert nn_dt.rank_difference == pytest.approx(0.2, abs=1e-9)
        assert not nn_dt.significant

    def test_significance_definition(self, rng):
        scores = rng.normal(size=(12, 3))
        res = friedman(ScoreMatrix(values=scores, treatments=("a", "b", "c")))
        for d in bonferroni_pairwise(res, alpha=0.1):
            assert d.significant == (d.rank_difference > d.critical_difference)


class _MeanModel:
    def __init__(self, mean):
        self.mean = mean

    def predict(self, X):
        return np.full(X.shape[0], self.mean)


def _mean_fit(X_tr, y_tr, X_val, y_val, scaler, seed):
    return _MeanModel(float(np.mean(y_tr)))


def _cv_fixture(rng, n=80):
    X = rng.normal(size=(n, 2))
    y = X[:, 0] * 2.0 + rng.normal(size=n)
    samples = [Sample(source_record_id=f"g{i}", features=tuple(X[i]),
                      target=float(y[i]), split_tag="train_val")
               for i in range(n)]
    folds = assign_folds(samples, k=10, seed=3, grouped=False)
    X_test = rng.normal(size=(20, 2))
    y_test = X_test[:, 0] * 2.0 + rng.normal(size=20)
    return X, y, X_test, y_test, folds


class TestCrossValidate:
    def test_k_entries_and_mean(self, rng):
        X, y, X_test, y_test, folds = _cv_fixture(rng)
        report, predictors = cross_validate(
            "mean", "hardness", _mean_fit, X, y, X_test, y_test, folds)
        assert len(report.fold_r2) == 10
        assert len(predictors) == 10
        assert report.mean_r2 == pytest.approx(
            float(np.mean(report.fold_r2)), abs=1e-12)
        assert report.mean_eqm == pytest.approx(
            float(np.mean(report.fold_eqm)), abs=1e-12)

    def test_parallel_bitwise_equals_serial(self, rng):
        X, y, X_test, y_test, folds = _cv_fixture(rng)
        serial, _ = cross_validate("mean", "hardness", _mean_fit,
                                   X, y, X_test, y_test, folds, jobs=1)
        parallel, _ = cross_validate("mean", "hardness", _mean_fit,
                                     X, y, X_test, y_test, folds, jobs=4)
        assert serial == parallel

    def test_fold_error_carries_fold_index(self, rng):
        X, y, X_test, y_test, folds = _cv_fixture(rng)

        def broken(X_tr, y_tr, X_val, y_val, scaler, seed):
            raise RuntimeError("boom")

        with pytest.raises(FoldFitError, match="fold 0"):
            cross_validate("x", "hardness", broken, X, y, X_test, y_test, folds)

    def test_report_csv_layout(self, rng):
        X, y, X_test, y_test, folds = _cv_fixture(rng)
        report, _ = cross_validate("mean", "hardness", _mean_fit,
                                   X, y, X_test, y_test, folds)
        lines = report.to_csv().strip().splitlines()
        assert lines[0] == "fold,test_r2,test_eqm,val_r2"
        assert len(lines) == 12   # header + 10 folds + Média
        assert lines[-1].startswith("Média,")
