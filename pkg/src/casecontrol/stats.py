# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Study metrics.

Effect sizes and their recovery error, the significance test that turns a fit
into a detection decision, detection accuracy across resamples, parameter
recovery, and the information criterion used for model comparison.
"""


# type annotations
from __future__ import annotations
from typing import Tuple, List, Dict, Any, Sequence, NamedTuple, Optional, Protocol, Union, TYPE_CHECKING

# standard libs
import math
import warnings
from dataclasses import dataclass, asdict

# external libs
import numpy as np
from scipy import stats
from scipy.special import logsumexp

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.core.exceptions import UsageError, DegenerateInput, NonFiniteLikelihood

# used only for annotations (these modules import this one)
if TYPE_CHECKING:
    from casecontrol.sim.dataset import SyntheticDataset
    from casecontrol.inference.sampler import FitResult

# public interface
__all__ = ['cohens_d', 'pearson_rho', 'welch_test', 'WelchResult', 'detect_difference', 'recovered_groups',
           'RecoveryReport', 'recovery_report', 'AggregateReport', 'aggregate', 'WAIC', 'WAICTerms',
           'WAICAccumulator', 'waic', 'waic_pointwise', 'waic_se', 'WAICComparison', 'compare_waic',
           'ParameterRecovery', 'parameter_recovery', 'GroupDifference', 'group_mean_difference', ]

# initialize logger
log = Logger.with_name(__name__)


def _vector(values: Sequence[float], name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float).ravel()
    if array.size < 2:
        raise UsageError(f'{name} needs at least two values (given {array.size})')
    return array


def cohens_d(group_a: Sequence[float], group_b: Sequence[float]) -> float:
    """Standardized mean difference ``(mean_a - mean_b) / pooled_sd``."""
    a, b = _vector(group_a, 'group_a'), _vector(group_b, 'group_b')
    pooled_var = ((a.size - 1) * a.var(ddof=1) + (b.size - 1) * b.var(ddof=1)) / (a.size + b.size - 2)
    if not pooled_var > 0:
        raise DegenerateInput('Pooled standard deviation is zero')
    return float((a.mean() - b.mean()) / math.sqrt(pooled_var))


def pearson_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation, NaN when either input is constant."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        return float(stats.pearsonr(x, y)[0])


class WelchResult(NamedTuple):
    """Welch two-sample t-test."""
    statistic: float
    df: float
    pvalue: float


def welch_test(group_a: Sequence[float], group_b: Sequence[float]) -> WelchResult:
    """Two-sided Welch t-test (unequal variances) with Welch-Satterthwaite degrees of freedom."""
    a, b = _vector(group_a, 'group_a'), _vector(group_b, 'group_b')
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    if not (va + vb) > 0:
        raise DegenerateInput('Both groups have zero variance')
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    result = stats.ttest_ind(a, b, equal_var=False)
    return WelchResult(float(result.statistic), float(df), float(result.pvalue))


def detect_difference(case_estimates: Sequence[float], control_estimates: Sequence[float],
                      alpha_level: float = 0.05) -> bool:
    """Reject equal group means by Welch t-test at `alpha_level`; degenerate input never detects."""
    try:
        result = welch_test(case_estimates, control_estimates)
    except DegenerateInput as error:
        log.warning(f'No detection: {error}')
        return False
    if not math.isfinite(result.pvalue):
        log.warning(f'No detection: undefined p-value (t = {result.statistic})')
        return False
    return result.pvalue < alpha_level


class FitLike(Protocol):
    """Anything carrying per-subject posterior means and a usability flag."""
    usable: bool
    alpha_mean: np.ndarray
    tau_mean: np.ndarray


def recovered_groups(fit: FitLike, data: SyntheticDataset) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior-mean learning rates split into (case, control)."""
    if not fit.usable:
        log.warning('Recovering group estimates from a fit flagged unusable')
    alpha = np.asarray(fit.alpha_mean, dtype=float)
    if alpha.size != data.n_subjects:
        raise UsageError(f'Fit has {alpha.size} subjects, dataset has {data.n_subjects}')
    return alpha[data.is_case], alpha[~data.is_case]


@dataclass(frozen=True)
class RecoveryReport:
    """True against recovered effect size for one fitted dataset."""

    true_d: float
    recovered_d: float
    es_error_pct: float
    detected: bool
    truth_differs: bool
    fit_usable: bool

    @classmethod
    def from_values(cls, true_d: float, recovered_d: float, detected: bool,
                    truth_differs: bool, fit_usable: bool) -> RecoveryReport:
        """Derive the signed relative error (NaN when the true effect is exactly zero)."""
        error = math.nan if true_d == 0 else 100 * (recovered_d - true_d) / true_d
        return cls(float(true_d), float(recovered_d), float(error), bool(detected), bool(truth_differs),
                   bool(fit_usable))

    def to_dict(self: RecoveryReport) -> Dict[str, Any]:
        return asdict(self)


def recovery_report(fit: FitLike, data: SyntheticDataset, alpha_level: float = 0.05) -> RecoveryReport:
    """Compare the fit's group difference in learning rate with the dataset's truth."""
    case, control = recovered_groups(fit, data)
    try:
        recovered = cohens_d(case, control)
    except DegenerateInput as error:
        log.warning(f'Recovered effect size undefined: {error}')
        recovered = math.nan
    truth_differs = data.config.case.alpha_spec.mode != data.config.control.alpha_spec.mode
    return RecoveryReport.from_values(data.true_d, recovered, detect_difference(case, control, alpha_level),
                                      truth_differs, fit.usable)


@dataclass(frozen=True)
class AggregateReport:
    """
    Detection accuracy over many resamples, in percent.

    Half-widths are for 95% intervals. Undefined rates (no positives or no
    negatives in truth) are NaN. With fewer than two reports the intervals span
    the full range and `degenerate` is set.
    """

    fpr_pct: float
    fpr_ci: float
    fnr_pct: float
    fnr_ci: float
    f1_pct: float
    f1_ci: float
    f1_lower: float
    f1_upper: float
    n_resamples: int
    n_excluded: int = 0
    es_error_pct: float = math.nan
    es_error_sd: float = math.nan
    degenerate: bool = False

    def to_dict(self: AggregateReport) -> Dict[str, Any]:
        return asdict(self)


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else math.nan


def _binomial_half_width(rate: float, count: int, z: float) -> float:
    if count < 2 or not math.isfinite(rate):
        return 100.0 if count < 2 else math.nan
    return 100 * z * math.sqrt(rate * (1 - rate) / count)


def aggregate(reports: Sequence[RecoveryReport], n_bootstrap: int = 2000, seed: int = 0,
              exclude_unusable: bool = True, confidence: float = 0.95) -> AggregateReport:
    """
    False-positive rate, false-negative rate and F1 over `reports`.

    Rates get normal-approximation intervals; F1 gets a percentile bootstrap
    over reports. Reports are put in canonical order first so the result does not
    depend on input order.
    """
    if not reports:
        raise UsageError('Cannot aggregate an empty list of reports')
    kept = [r for r in reports if r.fit_usable or not exclude_unusable]
    excluded = len(reports) - len(kept)
    if excluded:
        log.info(f'Excluded {excluded} unusable fits from aggregate')
    kept.sort(key=lambda r: (r.truth_differs, r.detected, r.true_d, r.recovered_d))
    truth = np.array([r.truth_differs for r in kept], dtype=bool)
    detected = np.array([r.detected for r in kept], dtype=bool)
    tp, fn = int(np.sum(truth & detected)), int(np.sum(truth & ~detected))
    fp, tn = int(np.sum(~truth & detected)), int(np.sum(~truth & ~detected))
    fpr, fnr = _ratio(fp, fp + tn), _ratio(fn, fn + tp)
    f1 = _ratio(2 * tp, 2 * tp + fp + fn)
    z = float(stats.norm.ppf(0.5 + confidence / 2))
    degenerate = len(kept) < 2
    if degenerate:
        f1_lower, f1_upper = 0.0, 100.0
    else:
        rng = np.random.default_rng(seed)
        index = rng.integers(0, len(kept), size=(n_bootstrap, len(kept)))
        t, d = truth[index], detected[index]
        b_tp, b_fp, b_fn = np.sum(t & d, axis=1), np.sum(~t & d, axis=1), np.sum(t & ~d, axis=1)
        with np.errstate(invalid='ignore', divide='ignore'):
            boot = 2 * b_tp / (2 * b_tp + b_fp + b_fn)
        if np.all(np.isnan(boot)):
            f1_lower = f1_upper = math.nan
        else:
            tail = 100 * (1 - confidence) / 2
            f1_lower, f1_upper = (100 * float(q) for q in np.nanpercentile(boot, [tail, 100 - tail]))
    errors = np.array([r.es_error_pct for r in kept if r.truth_differs and math.isfinite(r.es_error_pct)])
    return AggregateReport(
        fpr_pct=100 * fpr, fpr_ci=_binomial_half_width(fpr, fp + tn, z) if not degenerate else 100.0,
        fnr_pct=100 * fnr, fnr_ci=_binomial_half_width(fnr, fn + tp, z) if not degenerate else 100.0,
        f1_pct=100 * f1, f1_ci=100.0 if degenerate else (f1_upper - f1_lower) / 2,
        f1_lower=f1_lower, f1_upper=f1_upper, n_resamples=len(kept), n_excluded=excluded,
        es_error_pct=float(errors.mean()) if errors.size else math.nan,
        es_error_sd=float(errors.std(ddof=1)) if errors.size > 1 else math.nan,
        degenerate=degenerate,
    )


class WAIC(NamedTuple):
    """Information criterion on the deviance scale (lower is better)."""
    waic: float
    lppd: float
    p_waic: float


def _as_draws_by_points(pointwise_loglik: np.ndarray) -> np.ndarray:
    ll = np.asarray(pointwise_loglik, dtype=float)
    ll = ll.reshape(-1, 1) if ll.ndim == 1 else ll.reshape(-1, ll.shape[-1])
    if ll.shape[0] < 2:
        raise UsageError(f'WAIC needs at least two draws per data point (given {ll.shape[0]})')
    bad = ~np.isfinite(ll)
    if bad.any():
        point = int(np.argmax(bad.any(axis=0)))
        raise NonFiniteLikelihood(point, float(ll[:, point][bad[:, point]][0]))
    return ll


class WAICTerms(NamedTuple):
    """
    Per-point log predictive density and effective parameter count.

    Enough to compute the criterion, its standard error and paired comparisons
    without keeping the log-likelihood draws.
    """

    lppd: np.ndarray
    p_waic: np.ndarray

    @property
    def contributions(self: WAICTerms) -> np.ndarray:
        return -2 * (self.lppd - self.p_waic)

    def summary(self: WAICTerms) -> WAIC:
        return WAIC(float(self.contributions.sum()), float(self.lppd.sum()), float(self.p_waic.sum()))

    def se(self: WAICTerms) -> float:
        terms = self.contributions
        return float(math.sqrt(terms.size * terms.var())) if terms.size > 1 else math.nan

    def to_array(self: WAICTerms) -> np.ndarray:
        """Stacked 2 x points array (lppd row, then p_waic row)."""
        return np.stack([self.lppd, self.p_waic])

    @classmethod
    def from_array(cls: type, array: np.ndarray) -> WAICTerms:
        array = np.asarray(array, dtype=float)
        if array.ndim != 2 or array.shape[0] != 2:
            raise UsageError(f'Expected a 2 x points array of WAIC terms (given shape {array.shape})')
        return cls(array[0].copy(), array[1].copy())


def _checked_terms(lppd: np.ndarray, p_waic: np.ndarray) -> WAICTerms:
    if np.any(p_waic > 0.4):
        log.warning(f'{int(np.sum(p_waic > 0.4))} points have posterior log-likelihood variance above 0.4 '
                    f'(WAIC may be unreliable)')
    return WAICTerms(lppd, p_waic)


def waic_pointwise(pointwise_loglik: np.ndarray) -> WAICTerms:
    """
    Per-point log predictive density and effective parameter count.

    Input is draws x points (leading chain axis allowed and flattened).
    """
    ll = _as_draws_by_points(pointwise_loglik)
    return _checked_terms(logsumexp(ll, axis=0) - math.log(ll.shape[0]), ll.var(axis=0, ddof=1))


class WAICAccumulator:
    """
    Running WAIC terms over draws, one log-likelihood vector at a time.

    Matches :func:`waic_pointwise` on the stacked draws without holding them.
    """

    def __init__(self: WAICAccumulator, n_points: int) -> None:
        self.count = 0
        self.log_sum = np.full(n_points, -np.inf)
        self.mean = np.zeros(n_points)
        self.sum_sq = np.zeros(n_points)

    def add(self: WAICAccumulator, loglik: np.ndarray) -> None:
        ll = np.asarray(loglik, dtype=float)
        if ll.shape != self.mean.shape:
            raise UsageError(f'Expected {self.mean.size} points (given shape {ll.shape})')
        bad = ~np.isfinite(ll)
        if bad.any():
            point = int(np.argmax(bad))
            raise NonFiniteLikelihood(point, float(ll[point]))
        self.count += 1
        self.log_sum = np.logaddexp(self.log_sum, ll)
        delta = ll - self.mean
        self.mean += delta / self.count
        self.sum_sq += delta * (ll - self.mean)

    def terms(self: WAICAccumulator) -> WAICTerms:
        if self.count < 2:
            raise UsageError(f'WAIC needs at least two draws per data point (given {self.count})')
        return _checked_terms(self.log_sum - math.log(self.count), self.sum_sq / (self.count - 1))


def _terms(value: Union[np.ndarray, WAICTerms]) -> WAICTerms:
    return value if isinstance(value, WAICTerms) else waic_pointwise(value)


def waic(pointwise_loglik: Union[np.ndarray, WAICTerms]) -> WAIC:
    """Widely applicable information criterion ``-2 (lppd - p_waic)``."""
    return _terms(pointwise_loglik).summary()


def waic_se(pointwise_loglik: Union[np.ndarray, WAICTerms]) -> float:
    """Standard error of WAIC from the spread of its pointwise contributions."""
    return _terms(pointwise_loglik).se()


class WAICComparison(NamedTuple):
    """Difference WAIC(first) - WAIC(second) and its standard error."""
    delta: float
    se: float


def compare_waic(first: Union[np.ndarray, WAICTerms], second: Union[np.ndarray, WAICTerms]) -> WAICComparison:
    """Paired comparison of two models' WAIC over the same data points."""
    terms_a, terms_b = _terms(first), _terms(second)
    if terms_a.lppd.shape != terms_b.lppd.shape:
        raise UsageError(f'Models scored on different points ({terms_a.lppd.size} vs {terms_b.lppd.size})')
    diff = terms_a.contributions - terms_b.contributions
    se = math.sqrt(diff.size * diff.var()) if diff.size > 1 else math.nan
    return WAICComparison(float(diff.sum()), float(se))


class ParameterRecovery(NamedTuple):
    """Pearson correlation of posterior means with the true subject parameters."""
    alpha_rho: float
    tau_rho: float


def parameter_recovery(fit: FitLike, data: SyntheticDataset) -> ParameterRecovery:
    """Correlate posterior-mean subject parameters with the truth."""
    return ParameterRecovery(pearson_rho(fit.alpha_mean, data.true_alpha),
                             pearson_rho(fit.tau_mean, data.true_tau))


class GroupDifference(NamedTuple):
    """Posterior of case minus control group-mean learning rate."""
    mean: float
    lower: float
    upper: float
    prob_positive: float


def group_mean_difference(fit: FitResult, interval: float = 0.95) -> GroupDifference:
    """
    Fully Bayesian group comparison for a separate-priors fit.

    Takes each draw's case and control Beta means of the learning rate and summarizes
    their difference. Diagnostic only: detection decisions use :func:`detect_difference`.
    """
    if fit.layout is None or fit.layout.n_blocks != 2:
        raise UsageError('Group-mean difference needs a fit with separate case and control priors')
    draws = fit.draws.reshape(-1, fit.draws.shape[-1])
    means = []
    for block in range(2):
        omega, kappa = fit.layout.block_alpha(draws, block)
        a, b = omega * (kappa - 2) + 1, (1 - omega) * (kappa - 2) + 1
        means.append(a / (a + b))
    diff = means[0] - means[1]
    tail = 100 * (1 - interval) / 2
    lower, upper = np.percentile(diff, [tail, 100 - tail])
    return GroupDifference(float(diff.mean()), float(lower), float(upper), float(np.mean(diff > 0)))
