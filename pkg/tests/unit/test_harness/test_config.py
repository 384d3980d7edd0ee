# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Unit tests for run configuration."""


# type annotations
from typing import Dict, Any, Iterator

# standard libs
import os

# external libs
import toml
import pytest
from cmdkit.config import Configuration, ConfigurationError

# internal libs
from casecontrol.core.config import default, load_env
from casecontrol.harness.config import RunConfig, RUN_SECTIONS, RUN_FILE
from casecontrol.inference.posterior import ModelKind


BASE = Configuration(default=default)


def run_config(**changes: Dict[str, Any]) -> RunConfig:
    """Defaults with some section values replaced."""
    data = {section: dict(default[section]) for section in RUN_SECTIONS}
    for section, values in changes.items():
        data[section].update(values)
    return RunConfig(data)


@pytest.fixture
def clean_env(monkeypatch: pytest.MonkeyPatch) -> Iterator[pytest.MonkeyPatch]:
    """Environment without run overrides, with the cached view reset around the test."""
    for name in ('CASECONTROL_RUN_OUTPUT', 'CASECONTROL_RUN_JOBS'):
        monkeypatch.delenv(name, raising=False)
    load_env.cache_clear()
    yield monkeypatch
    load_env.cache_clear()


class TestLoad:
    """Unit tests for `RunConfig.load` layering."""

    def test_defaults(self, clean_env: pytest.MonkeyPatch) -> None:
        config = RunConfig.load(base=BASE)
        assert config.seed == 20_240_917
        assert config.jobs == 1
        assert config.perturbations == [(50, 200), (15, 200), (50, 40), (15, 40)]
        assert len(config.grid()) == 12

    def test_profile(self, clean_env: pytest.MonkeyPatch) -> None:
        config = RunConfig.load(profile='paper', base=BASE)
        assert config.resamples == 1000
        assert len(config.grid()) == 36

    def test_profile_alias(self, clean_env: pytest.MonkeyPatch) -> None:
        assert RunConfig.load(profile='full', base=BASE) == RunConfig.load(profile='paper', base=BASE)

    def test_file_over_profile(self, clean_env: pytest.MonkeyPatch, tmp_path) -> None:
        filepath = os.path.join(tmp_path, 'study.toml')
        with open(filepath, mode='w') as stream:
            stream.write('[run]\nresamples = 3\n\n[sampler]\nchains = 4\n')
        config = RunConfig.load(profile='paper', filepath=filepath, base=BASE)
        assert config.resamples == 3
        assert config.sampler_config().n_chains == 4
        assert len(config.grid()) == 36

    def test_flags_over_env(self, clean_env: pytest.MonkeyPatch) -> None:
        clean_env.setenv('CASECONTROL_RUN_JOBS', '3')
        clean_env.setenv('CASECONTROL_RUN_OUTPUT', 'elsewhere')
        load_env.cache_clear()
        config = RunConfig.load(base=BASE)
        assert config.jobs == 3
        assert config.output == 'elsewhere'
        assert RunConfig.load(base=BASE, jobs=5, output='here').jobs == 5

    def test_seed_flag(self, clean_env: pytest.MonkeyPatch) -> None:
        config = RunConfig.load(base=BASE, seed=7)
        assert config.seed == 7
        assert config.sampler_config().seed == 7
        assert config.sampler_config(seed=11).seed == 11

    def test_unknown_profile(self, clean_env: pytest.MonkeyPatch) -> None:
        try:
            RunConfig.load(profile='huge', base=BASE)
        except ConfigurationError as error:
            message, = error.args
            assert message == 'Unknown profile \'huge\' (expected one of desk, paper, full)'
        else:
            assert False, 'Did not raise ConfigurationError'

    def test_missing_file(self, clean_env: pytest.MonkeyPatch, tmp_path) -> None:
        with pytest.raises(ConfigurationError):
            RunConfig.load(filepath=os.path.join(tmp_path, 'missing.toml'), base=BASE)


class TestValidate:
    """Unit tests for `RunConfig.validate`."""

    def test_defaults_valid(self) -> None:
        run_config()

    @pytest.mark.parametrize('changes', [
        {'run': {'perturbations': []}},
        {'run': {'resamples': 0}},
        {'run': {'jobs': 0}},
        {'run': {'perturbations': [[60, 200]]}},
        {'run': {'perturbations': [[50, 201]]}},
        {'run': {'perturbations': [[50]]}},
        {'grid': {'pairing': 'diagonal'}},
        {'grid': {'modes': []}},
        {'window': {'selector': 'last'}},
        {'sampler': {'warmup': 5000}},
        {'sampler': {'pointwise': 'draws'}},
        {'dataset': {'tau_concentration': 1}},
        {'model': {'param_clamp': 0.7}},
    ])
    def test_rejects(self, changes: Dict[str, Any]) -> None:
        with pytest.raises(ConfigurationError):
            run_config(**changes)

    def test_empty_perturbations_message(self) -> None:
        try:
            run_config(run={'perturbations': []})
        except ConfigurationError as error:
            message, = error.args
            assert message == 'run.perturbations must not be empty'
        else:
            assert False, 'Did not raise ConfigurationError'

    def test_window_offset(self) -> None:
        assert run_config(window={'selector': 40}).window_selector == 40


class TestBuilders:
    """Unit tests for the objects a run configuration builds."""

    def test_dataset_config(self) -> None:
        config = run_config(run={'resamples': 5, 'seed': 3})
        cell = config.grid()[4]
        dataset = config.dataset_config(cell, 2)
        assert dataset.case.alpha_spec == cell.case
        assert dataset.control.alpha_spec == cell.control
        assert dataset.n_trials == 200
        assert dataset.resample_id == 2
        assert dataset.n_resamples == 5
        assert dataset.seed == 3
        assert dataset.env.drift_sd == 0.05

    def test_model_spec(self) -> None:
        spec = run_config(model={'kappa_scale': 2.0}).model_spec('separate')
        assert spec.kind is ModelKind.SEPARATE
        assert spec.hyperpriors.kappa_scale == 2.0

    def test_sampler_config(self) -> None:
        sampler = run_config().sampler_config()
        assert sampler.n_draws == 2000
        assert sampler.pointwise == 'trial'

    def test_write_round_trip(self, tmp_path) -> None:
        config = run_config(run={'resamples': 2}, window={'selector': 40})
        filepath = os.path.join(tmp_path, RUN_FILE)
        config.write(filepath)
        assert RunConfig.from_file(filepath) == config

    def test_equality(self) -> None:
        assert run_config() == run_config()
        assert run_config() != run_config(run={'seed': 1})

    def test_describe(self) -> None:
        config = run_config()
        assert toml.loads(config.describe('sampler')) == {'sampler': config.to_dict()['sampler']}
        assert set(toml.loads(config.describe())) == set(RUN_SECTIONS)
