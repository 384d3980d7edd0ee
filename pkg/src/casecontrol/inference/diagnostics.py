# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Convergence diagnostics for multi-chain draws (chains x iterations)."""


# type annotations
from __future__ import annotations

# standard libs
import math

# external libs
import numpy as np
from scipy import fft
from scipy.special import ndtri
from scipy.stats import rankdata

# internal libs
from casecontrol.core.exceptions import UsageError

# public interface
__all__ = ['split_rhat', 'ess_bulk', 'split_chains', 'rank_normalize', 'autocovariance', ]


def _validate(draws: np.ndarray) -> np.ndarray:
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[np.newaxis, :]
    if draws.ndim != 2:
        raise UsageError(f'Expected chains x iterations (given shape {draws.shape})')
    if draws.shape[1] < 4:
        raise UsageError(f'Need at least four draws per chain (given {draws.shape[1]})')
    return draws


def split_chains(draws: np.ndarray) -> np.ndarray:
    """Cut every chain into first and second halves (the middle draw of an odd chain is dropped)."""
    half = draws.shape[1] // 2
    return np.concatenate([draws[:, :half], draws[:, -half:]], axis=0)


def rank_normalize(draws: np.ndarray) -> np.ndarray:
    """Replace draws by normal scores of their pooled ranks."""
    ranks = rankdata(draws, method='average').reshape(draws.shape)
    return ndtri((ranks - 0.375) / (draws.size + 0.25))


def autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each row by FFT."""
    n = x.shape[-1]
    size = fft.next_fast_len(2 * n)
    centered = x - x.mean(axis=-1, keepdims=True)
    spectrum = fft.rfft(centered, n=size, axis=-1)
    return fft.irfft(spectrum * np.conjugate(spectrum), n=size, axis=-1)[..., :n] / n


def split_rhat(draws: np.ndarray) -> float:
    """
    Potential scale reduction factor over split chains.

    Returns ``inf`` when the pooled within-chain variance is zero.
    """
    chains = split_chains(_validate(draws))
    n = chains.shape[1]
    within = chains.var(axis=1, ddof=1).mean()
    if not within > 0:
        return math.inf
    var_plus = (n - 1) / n * within + chains.mean(axis=1).var(ddof=1)
    return float(math.sqrt(var_plus / within))


def ess_bulk(draws: np.ndarray) -> float:
    """
    Bulk effective sample size of rank-normalized split chains.

    Autocorrelations are summed in pairs until a pair turns negative (Geyer's
    initial positive sequence) and made monotone. Constant or non-finite draws
    give 0.
    """
    draws = _validate(draws)
    if not np.all(np.isfinite(draws)) or np.ptp(draws) == 0:
        return 0.0
    chains = split_chains(rank_normalize(draws))
    m, n = chains.shape
    acov = autocovariance(chains)
    mean_var = acov[:, 0].mean() * n / (n - 1)
    var_plus = mean_var * (n - 1) / n + (chains.mean(axis=1).var(ddof=1) if m > 1 else 0.0)
    if not var_plus > 0:
        return 0.0
    rho = np.zeros(n)
    rho[0] = 1.0
    rho_even, rho_odd = 1.0, 1 - (mean_var - acov[:, 1].mean()) / var_plus
    rho[1] = rho_odd
    t = 1
    while t < n - 3 and rho_even + rho_odd > 0:
        rho_even = 1 - (mean_var - acov[:, t + 1].mean()) / var_plus
        rho_odd = 1 - (mean_var - acov[:, t + 2].mean()) / var_plus
        if rho_even + rho_odd >= 0:
            rho[t + 1], rho[t + 2] = rho_even, rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0:
        rho[max_t + 1] = rho_even
    # initial monotone sequence
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = rho[t + 2] = (rho[t - 1] + rho[t]) / 2
        t += 2
    total = m * n
    tau = -1 + 2 * rho[:max(max_t + 1, 0)].sum() + rho[max_t + 1:max_t + 2].sum()
    tau = max(tau, 1 / math.log10(total))
    return float(total / tau)
