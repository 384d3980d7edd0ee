# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Unit tests for study metrics."""


# type annotations
from __future__ import annotations
from typing import List

# standard libs
import math
import random
from types import SimpleNamespace

# external libs
import pytest
import numpy as np
from hypothesis import given, strategies as st
from scipy.special import expit

# internal libs
from casecontrol.core.exceptions import UsageError, DegenerateInput, NonFiniteLikelihood
from casecontrol.stats import (cohens_d, pearson_rho, welch_test, detect_difference, RecoveryReport, aggregate,
                               WAICTerms, WAICAccumulator, waic, waic_pointwise, waic_se, compare_waic,
                               recovered_groups, recovery_report, parameter_recovery, group_mean_difference)
from casecontrol.inference.posterior import ModelKind, FitData, ParameterLayout
from casecontrol.inference.sampler import SamplerConfig, FitResult
from casecontrol.sim.agent import BetaSpec
from casecontrol.sim.dataset import GroupLabel, GroupSpec, DatasetConfig, generate_dataset


class TestCohensD:
    """Unit tests for `cohens_d`."""

    def test_identical(self) -> None:
        assert cohens_d([1, 2, 3], [1, 2, 3]) == 0

    def test_known_value(self) -> None:
        assert cohens_d([2, 4], [0, 2]) == pytest.approx(2 / math.sqrt(2))
        assert cohens_d([2, 4], [0, 2]) == pytest.approx(1.41421, abs=1e-5)

    def test_antisymmetric(self) -> None:
        assert cohens_d([0, 2], [2, 4]) == -cohens_d([2, 4], [0, 2])

    @given(scale=st.floats(0.01, 100))
    def test_scale(self, scale: float) -> None:
        a, b = np.array([0.1, 0.4, 0.5]), np.array([0.2, 0.9, 0.7])
        assert cohens_d(a * scale, b * scale) == pytest.approx(cohens_d(a, b))
        assert cohens_d(-a * scale, -b * scale) == pytest.approx(-cohens_d(a, b))

    def test_degenerate(self) -> None:
        try:
            cohens_d([1, 1], [1, 1])
        except DegenerateInput as error:
            message, = error.args
            assert message == 'Pooled standard deviation is zero'
        else:
            assert False, 'Did not raise DegenerateInput'

    def test_too_small(self) -> None:
        with pytest.raises(UsageError):
            cohens_d([1], [1, 2])


class TestPearsonRho:
    """Unit tests for `pearson_rho`."""

    def test_perfect(self) -> None:
        assert pearson_rho([1, 2, 3], [2, 4, 6]) == pytest.approx(1)
        assert pearson_rho([1, 2, 3], [3, 2, 1]) == pytest.approx(-1)

    def test_constant_is_nan(self) -> None:
        assert math.isnan(pearson_rho([1, 1, 1], [1, 2, 3]))


class TestWelchTest:
    """Unit tests for `welch_test` and `detect_difference`."""

    def test_known_value(self) -> None:
        result = welch_test([0, 1, 2], [10, 11, 12])
        assert result.statistic == pytest.approx(-12.247, abs=1e-3)
        assert result.df == pytest.approx(4)
        assert result.pvalue < 0.001

    def test_identical_not_detected(self) -> None:
        values = [0.2, 0.4, 0.3, 0.5]
        assert detect_difference(values, values) is False

    def test_separation_detected(self) -> None:
        rng = np.random.default_rng(1)
        case = 0.1 + rng.normal(0, 1e-3, 15)
        control = 0.8 + rng.normal(0, 1e-3, 15)
        assert detect_difference(case, control) is True

    def test_degenerate_not_detected(self) -> None:
        assert detect_difference([0.5, 0.5], [0.5, 0.5]) is False

    @given(seed=st.integers(0, 1000))
    def test_symmetric(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        a, b = rng.normal(0, 1, 10), rng.normal(0.5, 1, 10)
        assert detect_difference(a, b) == detect_difference(b, a)


def reports(tp: int, fn: int, fp: int, tn: int) -> List[RecoveryReport]:
    positives = [RecoveryReport.from_values(1.0, 1.0, True, True, True)] * tp
    positives += [RecoveryReport.from_values(1.0, 0.2, False, True, True)] * fn
    negatives = [RecoveryReport.from_values(0.1, 0.9, True, False, True)] * fp
    negatives += [RecoveryReport.from_values(0.1, 0.0, False, False, True)] * tn
    return positives + negatives


class TestRecoveryReport:
    """Unit tests for `RecoveryReport`."""

    def test_error(self) -> None:
        assert RecoveryReport.from_values(0.5, 0.4, True, True, True).es_error_pct == pytest.approx(-20)
        assert RecoveryReport.from_values(0.5, 0.6, True, True, True).es_error_pct == pytest.approx(20)

    def test_perfect(self) -> None:
        assert RecoveryReport.from_values(0.7, 0.7, True, True, True).es_error_pct == 0

    def test_zero_truth(self) -> None:
        assert math.isnan(RecoveryReport.from_values(0.0, 0.3, False, False, True).es_error_pct)


class TestAggregate:
    """Unit tests for `aggregate`."""

    def test_perfect(self) -> None:
        result = aggregate(reports(10, 0, 0, 10), n_bootstrap=200)
        assert result.fpr_pct == 0
        assert result.fnr_pct == 0
        assert result.f1_pct == 100

    def test_known_value(self) -> None:
        result = aggregate(reports(47, 3, 1, 49), n_bootstrap=500)
        precision, recall = 47 / 48, 47 / 50
        assert result.fnr_pct == pytest.approx(6)
        assert result.fpr_pct == pytest.approx(2)
        assert result.f1_pct == pytest.approx(200 * precision * recall / (precision + recall))
        assert result.f1_pct == pytest.approx(95.92, abs=0.01)
        assert result.f1_lower <= result.f1_pct <= result.f1_upper
        assert result.n_resamples == 100

    def test_half_widths(self) -> None:
        result = aggregate(reports(47, 3, 1, 49), n_bootstrap=200)
        z = 1.959963984540054
        assert result.fnr_ci == pytest.approx(100 * z * math.sqrt(0.06 * 0.94 / 50))
        assert result.fpr_ci == pytest.approx(100 * z * math.sqrt(0.02 * 0.98 / 50))

    def test_no_positives(self) -> None:
        result = aggregate(reports(0, 0, 2, 8), n_bootstrap=100)
        assert math.isnan(result.fnr_pct)
        assert result.fpr_pct == pytest.approx(20)

    def test_single_report(self) -> None:
        result = aggregate(reports(1, 0, 0, 0))
        assert result.degenerate
        assert result.f1_ci == 100
        assert result.f1_lower == 0 and result.f1_upper == 100

    def test_order_invariant(self) -> None:
        items = reports(30, 5, 4, 21)
        shuffled = list(items)
        random.Random(3).shuffle(shuffled)
        assert aggregate(items, seed=9, n_bootstrap=300) == aggregate(shuffled, seed=9, n_bootstrap=300)

    def test_excludes_unusable(self) -> None:
        items = reports(5, 0, 0, 5) + [RecoveryReport.from_values(1.0, 0.0, False, True, False)]
        assert aggregate(items, n_bootstrap=100).n_excluded == 1
        assert aggregate(items, n_bootstrap=100).fnr_pct == 0
        assert aggregate(items, n_bootstrap=100, exclude_unusable=False).fnr_pct == pytest.approx(100 / 6)

    def test_effect_size_error(self) -> None:
        items = [RecoveryReport.from_values(1.0, 1.1, True, True, True),
                 RecoveryReport.from_values(1.0, 0.9, True, True, True)]
        result = aggregate(items, n_bootstrap=100)
        assert result.es_error_pct == pytest.approx(0)
        assert result.es_error_sd == pytest.approx(math.sqrt(200))

    def test_empty(self) -> None:
        with pytest.raises(UsageError):
            aggregate([])


class TestWAIC:
    """Unit tests for `waic` and friends."""

    def test_constant_draws(self) -> None:
        ll = np.log(np.array([[0.5, 0.25], [0.5, 0.25], [0.5, 0.25]]))
        result = waic(ll)
        assert result.p_waic == pytest.approx(0)
        assert result.lppd == pytest.approx(math.log(0.5) + math.log(0.25))

    def test_known_value(self) -> None:
        # draws x points: point 0 sees log(0.5), log(0.25); point 1 sees log(0.5) twice
        ll = np.log(np.array([[0.5, 0.5], [0.25, 0.5]]))
        result = waic(ll)
        variance = np.var([math.log(0.5), math.log(0.25)], ddof=1)
        assert result.lppd == pytest.approx(math.log(0.375) + math.log(0.5))
        assert result.p_waic == pytest.approx(variance)
        assert result.waic == pytest.approx(-2 * (result.lppd - result.p_waic))

    def test_duplication_doubles(self) -> None:
        rng = np.random.default_rng(0)
        ll = np.log(rng.uniform(0.1, 0.9, size=(50, 6)))
        single, double = waic(ll), waic(np.hstack([ll, ll]))
        assert double.lppd == pytest.approx(2 * single.lppd)
        assert double.p_waic == pytest.approx(2 * single.p_waic)

    def test_chain_axis(self) -> None:
        rng = np.random.default_rng(1)
        ll = np.log(rng.uniform(0.1, 0.9, size=(2, 20, 5)))
        assert waic(ll) == waic(ll.reshape(40, 5))

    def test_non_finite(self) -> None:
        ll = np.log(np.array([[0.5, 0.5, 0.5], [0.5, 0.5, 0.5]]))
        ll[1, 2] = -np.inf
        try:
            waic(ll)
        except NonFiniteLikelihood as error:
            assert error.index == 2
        else:
            assert False, 'Did not raise NonFiniteLikelihood'

    def test_single_draw(self) -> None:
        with pytest.raises(UsageError):
            waic(np.zeros((1, 4)))

    def test_pointwise_sums(self) -> None:
        rng = np.random.default_rng(2)
        ll = np.log(rng.uniform(0.1, 0.9, size=(30, 8)))
        lppd, p_waic = waic_pointwise(ll)
        result = waic(ll)
        assert lppd.sum() == pytest.approx(result.lppd)
        assert p_waic.sum() == pytest.approx(result.p_waic)
        assert waic_se(ll) > 0

    def test_compare_self(self) -> None:
        rng = np.random.default_rng(3)
        ll = np.log(rng.uniform(0.1, 0.9, size=(30, 8)))
        comparison = compare_waic(ll, ll)
        assert comparison.delta == 0
        assert comparison.se == 0

    def test_compare_sign(self) -> None:
        rng = np.random.default_rng(4)
        better = np.log(rng.uniform(0.6, 0.9, size=(30, 8)))
        worse = np.log(rng.uniform(0.1, 0.3, size=(30, 8)))
        assert compare_waic(worse, better).delta > 0
        assert compare_waic(worse, better).delta == pytest.approx(waic(worse).waic - waic(better).waic)

    def test_compare_mismatch(self) -> None:
        with pytest.raises(UsageError):
            compare_waic(np.zeros((4, 3)), np.zeros((4, 2)))

    def test_terms_match_draws(self) -> None:
        rng = np.random.default_rng(5)
        first = np.log(rng.uniform(0.1, 0.9, size=(2, 30, 12)))
        second = np.log(rng.uniform(0.1, 0.9, size=(2, 30, 12)))
        terms = WAICTerms.from_array(waic_pointwise(first).to_array())
        assert terms.summary() == pytest.approx(waic(first))
        assert terms.se() == pytest.approx(waic_se(first))
        assert compare_waic(terms, waic_pointwise(second)) == pytest.approx(compare_waic(first, second))

    def test_terms_shape(self) -> None:
        with pytest.raises(UsageError):
            WAICTerms.from_array(np.zeros((3, 4)))

    def test_trial_level_differs_from_subject_totals(self) -> None:
        rng = np.random.default_rng(6)
        trials = np.log(rng.uniform(0.2, 0.9, size=(40, 3, 10)))
        by_trial = waic(trials.reshape(40, 30))
        by_subject = waic(trials.sum(axis=2))
        assert by_trial.lppd != pytest.approx(by_subject.lppd)
        assert by_trial.p_waic != pytest.approx(by_subject.p_waic)


class TestWAICAccumulator:
    """Unit tests for `WAICAccumulator`."""

    def test_matches_stacked_draws(self) -> None:
        rng = np.random.default_rng(7)
        ll = np.log(rng.uniform(0.1, 0.9, size=(50, 8)))
        accumulator = WAICAccumulator(8)
        for row in ll:
            accumulator.add(row)
        terms, expected = accumulator.terms(), waic_pointwise(ll)
        assert terms.lppd == pytest.approx(expected.lppd, rel=1e-10)
        assert terms.p_waic == pytest.approx(expected.p_waic, rel=1e-8)

    def test_shape_mismatch(self) -> None:
        with pytest.raises(UsageError):
            WAICAccumulator(3).add(np.zeros(4))

    def test_non_finite(self) -> None:
        accumulator = WAICAccumulator(3)
        try:
            accumulator.add(np.array([-1.0, np.nan, -1.0]))
        except NonFiniteLikelihood as error:
            assert error.index == 1
        else:
            assert False, 'Did not raise NonFiniteLikelihood'

    def test_single_draw(self) -> None:
        accumulator = WAICAccumulator(2)
        accumulator.add(np.zeros(2))
        with pytest.raises(UsageError):
            accumulator.terms()


def tiny_dataset(case_mode: float = 0.7):
    tau = BetaSpec(0.15, 10)
    return generate_dataset(DatasetConfig(case=GroupSpec(BetaSpec(case_mode, 30), tau, 6, GroupLabel.CASE),
                                          control=GroupSpec(BetaSpec(0.3, 30), tau, 6, GroupLabel.CONTROL),
                                          n_trials=20, seed=3, tolerance=1.0))


class TestRecoveredGroups:
    """Unit tests for `recovered_groups`, `recovery_report` and `parameter_recovery`."""

    def test_split(self) -> None:
        dataset = tiny_dataset()
        fit = SimpleNamespace(usable=True, alpha_mean=dataset.true_alpha, tau_mean=dataset.true_tau)
        case, control = recovered_groups(fit, dataset)
        assert np.array_equal(case, dataset.true_alpha[:6])
        assert np.array_equal(control, dataset.true_alpha[6:])

    def test_perfect_recovery(self) -> None:
        dataset = tiny_dataset()
        fit = SimpleNamespace(usable=True, alpha_mean=dataset.true_alpha, tau_mean=dataset.true_tau)
        report = recovery_report(fit, dataset)
        assert report.recovered_d == pytest.approx(dataset.true_d)
        assert report.es_error_pct == pytest.approx(0, abs=1e-9)
        assert report.truth_differs
        assert parameter_recovery(fit, dataset).alpha_rho == pytest.approx(1)
        assert parameter_recovery(fit, dataset).tau_rho == pytest.approx(1)

    def test_null_cell(self) -> None:
        dataset = tiny_dataset(case_mode=0.3)
        fit = SimpleNamespace(usable=False, alpha_mean=dataset.true_alpha, tau_mean=dataset.true_tau)
        report = recovery_report(fit, dataset)
        assert not report.truth_differs
        assert not report.fit_usable

    def test_rejects_size(self) -> None:
        dataset = tiny_dataset()
        fit = SimpleNamespace(usable=True, alpha_mean=np.zeros(3), tau_mean=np.zeros(3))
        with pytest.raises(UsageError):
            recovered_groups(fit, dataset)


def constant_fit(kind: ModelKind) -> FitResult:
    """Fit whose every draw puts case and control learning-rate modes at expit(1) and expit(-1)."""
    data = FitData.from_arrays(np.zeros((2, 5)), np.zeros((2, 5)), np.array([True, False]))
    layout = ParameterLayout.for_model(kind, data)
    theta = np.zeros(layout.dim)
    theta[4], theta[5] = 1.0, math.log(8)
    if kind is ModelKind.SEPARATE:
        theta[8], theta[9] = -1.0, math.log(8)
    draws = np.tile(theta, (2, 10, 1))
    return FitResult(draws=draws, names=layout.names(), rhat=np.ones(layout.dim), ess=np.full(layout.dim, 20.0),
                     divergences=np.zeros(2, dtype=int), accept_rate=np.full(2, 0.8), step_size=np.full(2, 0.5),
                     inv_metric=np.ones((2, layout.dim)), treedepth_hits=np.zeros(2, dtype=int),
                     warmup_divergences=np.zeros(2, dtype=int), config=SamplerConfig(n_samples=20, n_warmup=10),
                     layout=layout)


class TestGroupMeanDifference:
    """Unit tests for `group_mean_difference`."""

    def test_known_value(self) -> None:
        result = group_mean_difference(constant_fit(ModelKind.SEPARATE))
        expected = 0.8 * (expit(1) - expit(-1))
        assert result.mean == pytest.approx(expected)
        assert result.lower == pytest.approx(expected)
        assert result.upper == pytest.approx(expected)
        assert result.prob_positive == 1

    def test_rejects_shared(self) -> None:
        with pytest.raises(UsageError):
            group_mean_difference(constant_fit(ModelKind.SHARED))
