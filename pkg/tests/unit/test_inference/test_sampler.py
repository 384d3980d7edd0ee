# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Unit tests for the No-U-Turn sampler."""


# type annotations
from typing import Tuple

# standard libs
import math

# external libs
import pytest
import numpy as np
from scipy import stats
from scipy.special import expit

# internal libs
from casecontrol.core.exceptions import UsageError, FitFailure, InitializationError
from casecontrol.core.seeding import derive_seed
from casecontrol.inference.posterior import ModelKind, ModelSpec, FitData
from casecontrol.inference.sampler import (SamplerConfig, Chain, leapfrog, hamiltonian, sample_nuts, nuts_fit,
                                           find_reasonable_step_size)
from casecontrol.stats import waic_pointwise


def standard_normal(theta: np.ndarray) -> Tuple[float, np.ndarray]:
    return -0.5 * float(np.dot(theta, theta)), -theta


def beta_bernoulli(theta: np.ndarray) -> Tuple[float, np.ndarray]:
    """Logit of a success probability after 7 successes in 10 trials under a flat prior."""
    p = expit(theta[0])
    return 8 * math.log(p) + 4 * math.log(1 - p), np.array([8 * (1 - p) - 4 * p])


def nowhere(theta: np.ndarray) -> Tuple[float, np.ndarray]:
    """Finite only at the origin."""
    return (0.0 if not np.any(theta) else -math.inf), np.zeros_like(theta)


class TestSamplerConfig:
    """Unit tests for `SamplerConfig`."""

    def test_draws(self) -> None:
        assert SamplerConfig().n_draws == 2000
        assert SamplerConfig(n_samples=10, n_warmup=0).n_draws == 10

    def test_dict(self) -> None:
        config = SamplerConfig(n_chains=3, seed=5, pointwise='subject')
        assert SamplerConfig.from_dict(config.to_dict()) == config

    def test_rejects_warmup(self) -> None:
        try:
            SamplerConfig(n_samples=100, n_warmup=100)
        except UsageError as error:
            message, = error.args
            assert message == 'Warmup (100) must be non-negative and below samples (100)'
        else:
            assert False, 'Did not raise UsageError'

    @pytest.mark.parametrize('options', [{'n_chains': 0}, {'target_accept': 1.0}, {'max_treedepth': 0},
                                         {'pointwise': 'draws'}])
    def test_rejects(self, options: dict) -> None:
        with pytest.raises(UsageError):
            SamplerConfig(**options)


class TestLeapfrog:
    """Unit tests for `leapfrog` and `hamiltonian`."""

    def test_reversible(self) -> None:
        theta, p = np.array([0.3, -1.2]), np.array([0.5, 0.1])
        metric = np.ones(2)
        logp, grad = standard_normal(theta)
        forward = leapfrog(standard_normal, theta, p, grad, 0.1, metric)
        back_theta, back_p, _, _ = leapfrog(standard_normal, forward[0], -forward[1], forward[3], 0.1, metric)
        assert np.allclose(back_theta, theta)
        assert np.allclose(-back_p, p)

    def test_energy_error_shrinks_with_step(self) -> None:
        rng = np.random.default_rng(0)
        theta, p = rng.normal(0, 1, 10), rng.normal(0, 1, 10)
        metric = np.ones(10)
        logp, grad = standard_normal(theta)
        h0 = hamiltonian(logp, p, metric)
        drift = []
        for step in (0.4, 0.2, 0.1):
            x, q, value, g = theta, p, logp, grad
            worst = 0.0
            for _ in range(int(round(4 / step))):
                x, q, value, g = leapfrog(standard_normal, x, q, g, step, metric)
                worst = max(worst, abs(hamiltonian(value, q, metric) - h0))
            drift.append(worst)
        assert drift[0] > drift[1] > drift[2]
        assert drift[2] < 0.1

    def test_reasonable_step_size(self) -> None:
        theta = np.zeros(5)
        logp, grad = standard_normal(theta)
        step = find_reasonable_step_size(standard_normal, theta, logp, grad, np.ones(5), np.random.default_rng(1))
        assert 0.1 <= step <= 4


class TestSampleNuts:
    """Unit tests for `sample_nuts`."""

    def test_standard_normal(self) -> None:
        config = SamplerConfig(n_chains=4, n_samples=3000, n_warmup=1000, seed=1)
        inits = [np.random.default_rng(i).uniform(-2, 2, 10) for i in range(4)]
        result = sample_nuts(standard_normal, inits, config)
        pooled = result.draws.reshape(-1, 10)
        assert result.draws.shape == (4, 2000, 10)
        assert np.all(np.abs(pooled.mean(axis=0)) < 0.05)
        assert np.all(np.abs(pooled.std(axis=0) - 1) < 0.05)
        assert result.max_rhat < 1.01
        assert result.usable
        assert result.divergences.sum() == 0

    def test_conjugate(self) -> None:
        config = SamplerConfig(n_chains=2, n_samples=4000, n_warmup=1000, seed=2)
        result = sample_nuts(beta_bernoulli, [np.zeros(1), np.ones(1)], config)
        p = expit(result.draws[..., 0]).ravel()
        posterior = stats.beta(8, 4)
        assert p.mean() == pytest.approx(posterior.mean(), abs=0.01)
        assert p.std() == pytest.approx(posterior.std(), abs=0.01)
        assert stats.kstest(p[::10], posterior.cdf).pvalue > 0.001

    def test_deterministic(self) -> None:
        config = SamplerConfig(n_chains=2, n_samples=200, n_warmup=100, seed=3)
        inits = [np.zeros(3), np.ones(3)]
        first = sample_nuts(standard_normal, inits, config)
        second = sample_nuts(standard_normal, inits, SamplerConfig(n_chains=2, n_samples=200, n_warmup=100, seed=3,
                                                                  parallel=False))
        assert np.array_equal(first.draws, second.draws)
        assert np.array_equal(first.step_size, second.step_size)

    def test_seed_changes_draws(self) -> None:
        inits = [np.zeros(2), np.zeros(2)]
        first = sample_nuts(standard_normal, inits, SamplerConfig(n_samples=50, n_warmup=20, seed=0))
        second = sample_nuts(standard_normal, inits, SamplerConfig(n_samples=50, n_warmup=20, seed=1))
        assert not np.array_equal(first.draws, second.draws)

    def test_rejects_inits(self) -> None:
        with pytest.raises(UsageError):
            sample_nuts(standard_normal, [np.zeros(2)], SamplerConfig(n_chains=2))


class TestChain:
    """Unit tests for `Chain`."""

    def test_all_divergent(self) -> None:
        config = SamplerConfig(n_chains=1, n_samples=20, n_warmup=10)
        chain = Chain(nowhere, np.zeros(2), config, derive_seed(0, 'chain'))
        try:
            chain.run()
        except FitFailure as error:
            assert error.diagnostics['warmup_divergences'] == 10
        else:
            assert False, 'Did not raise FitFailure'

    def test_bad_init(self) -> None:
        config = SamplerConfig(n_chains=1, n_samples=20, n_warmup=10)
        chain = Chain(nowhere, np.ones(2), config, derive_seed(0, 'chain'))
        with pytest.raises(InitializationError):
            chain.run()

    def test_windows(self) -> None:
        config = SamplerConfig(n_chains=1, n_samples=1200, n_warmup=1000)
        chain = Chain(standard_normal, np.zeros(2), config, derive_seed(0, 'chain'))
        assert chain.early_end == 500
        assert chain.collect_end == 950

    def test_metric_learned(self) -> None:
        def scaled(theta: np.ndarray) -> Tuple[float, np.ndarray]:
            return -0.5 * float(theta[0] ** 2 / 9 + theta[1] ** 2), -np.array([theta[0] / 9, theta[1]])
        config = SamplerConfig(n_chains=1, n_samples=700, n_warmup=600)
        chain = Chain(scaled, np.zeros(2), config, derive_seed(4, 'chain'))
        chain.run()
        assert chain.inv_metric[0] > 3 * chain.inv_metric[1]


def tiny_data() -> FitData:
    rng = np.random.default_rng(0)
    return FitData.from_arrays(rng.integers(0, 2, size=(4, 30)), rng.integers(0, 2, size=(4, 30)),
                               np.array([True, True, False, False]))


class TestNutsFit:
    """Unit tests for `nuts_fit`."""

    def test_model_fit(self) -> None:
        config = SamplerConfig(n_chains=2, n_samples=300, n_warmup=150, seed=7, pointwise='subject')
        result = nuts_fit(ModelSpec(ModelKind.SEPARATE), tiny_data(), config)
        assert result.draws.shape == (2, 150, 16)
        assert result.names[-1] == 'kappa_tau[control]'
        assert result.pointwise.shape == (2, 150, 4)
        assert np.all(result.pointwise <= 0)
        assert result.attempts in (1, 2)
        assert result.alpha_mean.shape == (4, )
        assert np.all((result.alpha_mean > 0) & (result.alpha_mean < 1))

    def test_trial_pointwise(self) -> None:
        config = SamplerConfig(n_chains=1, n_samples=60, n_warmup=30, seed=8, retry=False)
        result = nuts_fit(ModelSpec(ModelKind.SHARED), tiny_data(), config)
        assert result.pointwise.shape == (1, 30, 120)
        assert result.attempts == 1

    def test_terms_without_draws(self) -> None:
        config = SamplerConfig(n_chains=1, n_samples=60, n_warmup=30, seed=10, retry=False)
        full = nuts_fit(ModelSpec(ModelKind.SHARED), tiny_data(), config)
        reduced = nuts_fit(ModelSpec(ModelKind.SHARED), tiny_data(), config, keep_pointwise=False)
        assert reduced.pointwise is None
        assert np.array_equal(full.draws, reduced.draws)
        expected = waic_pointwise(full.pointwise)
        assert reduced.waic_terms.lppd.shape == (120, )
        assert reduced.waic_terms.lppd == pytest.approx(expected.lppd, rel=1e-10)
        assert reduced.waic_terms.p_waic == pytest.approx(expected.p_waic, rel=1e-8)

    def test_deterministic(self) -> None:
        config = SamplerConfig(n_chains=2, n_samples=60, n_warmup=30, seed=9, retry=False, pointwise='none')
        first = nuts_fit(ModelSpec(ModelKind.SHARED), tiny_data(), config)
        second = nuts_fit(ModelSpec(ModelKind.SHARED), tiny_data(), config)
        assert np.array_equal(first.draws, second.draws)
        assert first.pointwise is None
