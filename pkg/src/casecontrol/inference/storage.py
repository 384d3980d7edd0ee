# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Fit artifacts on disk.

A fit directory holds:

    fit.json        sidecar: format, version, model, sampler config, layout,
                    parameter names, diagnostics, posterior-mean subject parameters
    draws.npy       float64 chains x draws x parameters (unconstrained scale)
    pointwise.npy   float64 chains x draws x points (when recorded)
    waic.npy        float64 2 x points, per-point lppd and p_waic (when reduced)

Fits that reduced their pointwise draws on the fly store only the criterion
terms. Pruning removes the draws and pointwise arrays and keeps the sidecar and
the criterion terms.
"""


# type annotations
from __future__ import annotations
from typing import List, Dict, Any, Union, Optional, Final

# standard libs
import os
import json
from dataclasses import dataclass

# external libs
import numpy as np

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.core.exceptions import UsageError
from casecontrol.inference.posterior import ModelSpec, ParameterLayout
from casecontrol.inference.sampler import FitResult, SamplerConfig
from casecontrol.stats import WAICTerms, waic_pointwise

# public interface
__all__ = ['FitSummary', 'save_fit', 'load_fit', 'load_waic_terms', 'prune_fit', 'FIT_FORMAT', 'FIT_VERSION',
           'SIDECAR', 'DRAWS', 'POINTWISE', 'WAIC_TERMS', ]

# initialize logger
log = Logger.with_name(__name__)


FIT_FORMAT: Final[str] = 'casecontrol-fit'
FIT_VERSION: Final[int] = 1

SIDECAR: Final[str] = 'fit.json'
DRAWS: Final[str] = 'draws.npy'
POINTWISE: Final[str] = 'pointwise.npy'
WAIC_TERMS: Final[str] = 'waic.npy'


@dataclass(frozen=True, eq=False)
class FitSummary:
    """What remains of a fit once its draws are pruned."""

    model: ModelSpec
    usable: bool
    attempts: int
    alpha_mean: np.ndarray
    tau_mean: np.ndarray
    diagnostics: Dict[str, Any]


def _sidecar(fit: FitResult) -> Dict[str, Any]:
    if fit.layout is None or fit.model is None:
        raise UsageError('Only model fits can be saved')
    return {
        'format': FIT_FORMAT,
        'version': FIT_VERSION,
        'model': fit.model.to_dict(),
        'config': fit.config.to_dict(),
        'layout': {'n_subjects': fit.layout.n_subjects, 'n_blocks': fit.layout.n_blocks,
                   'block_of_subject': fit.layout.block_of_subject.tolist()},
        'names': list(fit.names),
        'inv_metric': fit.inv_metric.tolist(),
        'diagnostics': fit.diagnostics(),
        'summary': {'alpha_mean': fit.alpha_mean.tolist(), 'tau_mean': fit.tau_mean.tolist()},
        'pointwise': None if fit.pointwise is None and fit.waic_terms is None else fit.config.pointwise,
    }


def save_fit(fit: FitResult, directory: str, prune: bool = False) -> List[str]:
    """Write a fit; with `prune` only the sidecar and WAIC terms are kept. Returns written file paths in order."""
    os.makedirs(directory, exist_ok=True)
    written = []
    if not prune:
        written.append(os.path.join(directory, DRAWS))
        np.save(written[-1], fit.draws)
        if fit.pointwise is not None:
            written.append(os.path.join(directory, POINTWISE))
            np.save(written[-1], fit.pointwise)
    if fit.waic_terms is not None:
        written.append(os.path.join(directory, WAIC_TERMS))
        np.save(written[-1], fit.waic_terms.to_array())
    written.append(os.path.join(directory, SIDECAR))
    with open(written[-1], mode='w') as stream:
        json.dump(_sidecar(fit), stream, indent=2)
    log.debug(f'Saved fit to {directory} ({len(written)} files)')
    return written


def _read_sidecar(directory: str) -> Dict[str, Any]:
    path = os.path.join(directory, SIDECAR)
    with open(path, mode='r') as stream:
        data = json.load(stream)
    if data.get('format') != FIT_FORMAT:
        raise UsageError(f'Not a fit sidecar: {path}')
    if data.get('version') != FIT_VERSION:
        raise UsageError(f'Unsupported fit version {data.get("version")} ({path})')
    return data


def load_fit(directory: str, summary_only: bool = False) -> Union[FitResult, FitSummary]:
    """
    Read a fit written by :func:`save_fit`.

    Returns the full :class:`FitResult` when draws are present (and not `summary_only`),
    otherwise a :class:`FitSummary`.
    """
    data = _read_sidecar(directory)
    model = ModelSpec.from_dict(data['model'])
    diagnostics = data['diagnostics']
    draws_path = os.path.join(directory, DRAWS)
    if summary_only or not os.path.exists(draws_path):
        return FitSummary(model=model, usable=bool(diagnostics['usable']), attempts=int(diagnostics['attempts']),
                          alpha_mean=np.array(data['summary']['alpha_mean']),
                          tau_mean=np.array(data['summary']['tau_mean']), diagnostics=diagnostics)
    pointwise_path = os.path.join(directory, POINTWISE)
    pointwise: Optional[np.ndarray] = np.load(pointwise_path) if os.path.exists(pointwise_path) else None
    terms_path = os.path.join(directory, WAIC_TERMS)
    terms = WAICTerms.from_array(np.load(terms_path)) if os.path.exists(terms_path) else None
    layout = ParameterLayout(**data['layout'])
    return FitResult(draws=np.load(draws_path), names=data['names'],
                     rhat=np.array(diagnostics['rhat']), ess=np.array(diagnostics['ess']),
                     divergences=np.array(diagnostics['divergences'], dtype=np.int64),
                     accept_rate=np.array(diagnostics['accept_rate']),
                     step_size=np.array(diagnostics['step_size']),
                     inv_metric=np.array(data['inv_metric']),
                     treedepth_hits=np.array(diagnostics['treedepth_hits'], dtype=np.int64),
                     warmup_divergences=np.array(diagnostics['warmup_divergences'], dtype=np.int64),
                     config=SamplerConfig.from_dict(data['config']),
                     pointwise=pointwise, waic_terms=terms, layout=layout, model=model,
                     attempts=int(diagnostics['attempts']))


def load_waic_terms(directory: str) -> Optional[WAICTerms]:
    """Information-criterion terms of a saved fit, from `waic.npy` or the pointwise draws (None if neither)."""
    terms_path = os.path.join(directory, WAIC_TERMS)
    if os.path.exists(terms_path):
        return WAICTerms.from_array(np.load(terms_path))
    pointwise_path = os.path.join(directory, POINTWISE)
    if os.path.exists(pointwise_path):
        return waic_pointwise(np.load(pointwise_path))
    return None


def prune_fit(directory: str) -> List[str]:
    """Delete the draws and pointwise arrays, keeping the sidecar and criterion terms. Returns removed paths."""
    _read_sidecar(directory)
    removed = []
    for name in (DRAWS, POINTWISE):
        path = os.path.join(directory, name)
        if os.path.exists(path):
            os.remove(path)
            removed.append(path)
    log.debug(f'Pruned {len(removed)} files from {directory}')
    return removed
