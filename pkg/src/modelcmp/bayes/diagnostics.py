"""Rank-normalized split R-hat and effective sample size."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import fft, special
from scipy.stats import rankdata

__all__ = ["Diagnostics", "split_rhat", "rank_normalized_rhat", "effective_sample_size", "diagnostics"]

RHAT_LIMIT = 1.05


class Diagnostics(dict):
    """Mapping ``name -> {"rhat": float | None, "ess": float}``."""

    @property
    def max_rhat(self) -> float | None:
        vals = [v["rhat"] for v in self.values() if v["rhat"] is not None]
        return max(vals) if vals else None

    @property
    def min_ess(self) -> float:
        return min(v["ess"] for v in self.values())

    def reliable(self, limit: float = RHAT_LIMIT) -> bool:
        m = self.max_rhat
        return m is not None and m <= limit


def _split(draws: np.ndarray) -> np.ndarray:
    """(C, S, ...) -> (2C, S//2, ...), dropping a middle draw when S is odd."""
    c, s = draws.shape[:2]
    half = s // 2
    return np.concatenate([draws[:, :half], draws[:, s - half:]], axis=0)


def _rhat_core(chains: np.ndarray) -> np.ndarray:
    m, n = chains.shape[:2]
    means = chains.mean(axis=1)
    within = chains.var(axis=1, ddof=1).mean(axis=0)
    between = n * means.var(axis=0, ddof=1)
    var_plus = (n - 1) / n * within + between / n
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.sqrt(var_plus / within)
    # Constant chains: identical constants converge trivially, distinct ones never do.
    const = within == 0
    if np.any(const):
        rhat = np.where(const & (between == 0), 1.0, rhat)
        rhat = np.where(const & (between > 0), np.inf, rhat)
    return rhat


def split_rhat(draws: np.ndarray) -> np.ndarray:
    return _rhat_core(_split(np.asarray(draws, dtype=float)))


def _rank_normalize(chains: np.ndarray) -> np.ndarray:
    m, n = chains.shape[:2]
    flat = chains.reshape(m * n, -1)
    ranks = rankdata(flat, axis=0, method="average")
    z = special.ndtri((ranks - 0.375) / (m * n + 0.25))
    return z.reshape(chains.shape)


def rank_normalized_rhat(draws: np.ndarray, z: np.ndarray | None = None) -> np.ndarray:
    """Max of bulk and folded rank-normalized split R-hat, per parameter.

    ``z`` may carry the already rank-normalized draws (ranks are pooled over
    all chains, so splitting does not change them).
    """
    draws = np.asarray(draws, dtype=float)
    if z is None:
        z = _rank_normalize(draws)
    bulk = _rhat_core(_split(z))
    folded = np.abs(draws - np.median(draws.reshape(-1, *draws.shape[2:]), axis=0))
    tail = _rhat_core(_split(_rank_normalize(folded)))
    return np.maximum(bulk, tail)


def _autocov(x: np.ndarray) -> np.ndarray:
    """Autocovariance along axis 1 via FFT; x is (C, S, P)."""
    n = x.shape[1]
    size = fft.next_fast_len(2 * n - 1, real=True)
    centered = x - x.mean(axis=1, keepdims=True)
    f = fft.rfft(centered, n=size, axis=1)
    acov = fft.irfft(f.real**2 + f.imag**2, n=size, axis=1)[:, :n]
    return acov / n


def effective_sample_size(draws: np.ndarray) -> np.ndarray:
    """Multi-chain ESS with Geyer's initial monotone sequence, per parameter."""
    x = np.asarray(draws, dtype=float)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[:, :, None]
    m, n = x.shape[:2]
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1.0)
    mean_var = chain_var.mean(axis=0)
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus = var_plus + x.mean(axis=1).var(axis=0, ddof=1)
    degenerate = var_plus <= 0
    safe = np.where(degenerate, 1.0, var_plus)
    rho = 1.0 - (mean_var - acov.mean(axis=0)) / safe  # (S, P)
    rho[0] = 1.0
    n_pairs = n // 2
    pairs = rho[: 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    # Truncate at the first negative pair sum, then force a monotone decrease.
    negative = pairs < 0
    first_neg = np.where(negative.any(axis=0), negative.argmax(axis=0), n_pairs)
    pairs = np.minimum.accumulate(np.maximum(pairs, 0.0), axis=0)
    keep = np.arange(n_pairs)[:, None] < first_neg[None, :]
    tau = -1.0 + 2.0 * np.where(keep, pairs, 0.0).sum(axis=0)
    tau = np.maximum(tau, 1.0 / math.log10(m * n))
    ess = np.where(degenerate, float(m * n), m * n / tau)
    return ess[0] if squeeze else ess


def diagnostics(draws: np.ndarray, names=None) -> Diagnostics:
    """R-hat and bulk ESS for every scalar parameter of (C, S, P) draws.

    With a single chain R-hat is unavailable and recorded as ``None``.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 2:
        draws = draws[:, :, None]
    c, s, p = draws.shape
    names = list(names) if names is not None else [f"p{j}" for j in range(p)]
    if c < 2:
        warnings.warn("R-hat needs at least two chains; recording it as unavailable", RuntimeWarning, stacklevel=2)
        rhat = [None] * p
    z = _rank_normalize(draws)
    if c >= 2:
        rhat = [float(v) for v in rank_normalized_rhat(draws, z)]
    ess = effective_sample_size(z)
    return Diagnostics({name: {"rhat": rhat[j], "ess": float(ess[j])} for j, name in enumerate(names)})
