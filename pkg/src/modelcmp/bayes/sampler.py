"""Adaptive coordinate-wise random-walk Metropolis for the hierarchical model.

The parameter vector of one chain is laid out as
``[mu_1..mu_N, sigma_1..sigma_N, mu_0, sigma_0, nu, alpha, beta]``.
Scale parameters (sigma_i, sigma_0, nu) are proposed on the log scale with
the Jacobian term included; step sizes adapt only during burn-in.

Besides one update per coordinate, each sweep makes two joint moves that
keep the standardized deviations (mu_i - mu_0) / sigma_0 fixed: a common
translation of mu_0 and all mu_i, and a rescaling of sigma_0 with the mu_i
deviations. Both are Metropolis steps on a single scalar and fix the slow
mixing of sigma_0 when the population spread is small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numba
import numpy as np

from ..perfdata import PairDifferences
from .model import SIGMA_FLOOR, HierPriors, HierState

__all__ = ["SamplerConfig", "McmcResult", "run_mcmc"]

ADAPT_LOW = 0.2
ADAPT_HIGH = 0.5
BLOCK = 1024


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    total_draws: int = 50_000
    burn_in: int = 2_500
    adapt_every: int = 50

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("need at least one chain")
        if self.total_draws < self.chains:
            raise ValueError("total_draws must be at least the number of chains")
        if self.burn_in < 0 or self.adapt_every < 1:
            raise ValueError("burn_in must be >= 0 and adapt_every >= 1")

    @property
    def draws_per_chain(self) -> int:
        return self.total_draws // self.chains

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class McmcResult:
    draws: np.ndarray  # (C, S, P)
    acceptance: np.ndarray  # (C, P + 2) per move, over retained iterations; last two are the joint moves
    step_sizes: np.ndarray  # (C, P + 2) after adaptation
    n_datasets: int
    seed: int

    def param(self, name: str) -> np.ndarray:
        n = self.n_datasets
        offsets = {"mu_0": 2 * n, "sigma_0": 2 * n + 1, "nu": 2 * n + 2, "alpha": 2 * n + 3, "beta": 2 * n + 4}
        if name in offsets:
            return self.draws[:, :, offsets[name]]
        kind, _, idx = name.rpartition("_")
        i = int(idx) - 1
        return self.draws[:, :, i if kind == "mu" else n + i]

    def state(self, chain: int, draw: int) -> HierState:
        return HierState.from_vector(self.draws[chain, draw])


@numba.njit(cache=True)
def _t_const(nu):
    return math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - 0.5 * math.log(nu * math.pi)


@numba.njit(cache=True)
def _loglik(xbar, ss, mu, sigma, r, a_coef, b_coef):
    d = xbar - mu
    return -r * math.log(sigma) - 0.5 * (ss * b_coef + a_coef * d * d) / (sigma * sigma)


@numba.njit(cache=True, nogil=True)
def _advance(xbar, ss, r, rho, bounds, th, step, acc, tq, ll, z, e, it0, n_burn, adapt_every, mirror, out):
    """Run ``z.shape[0]`` sweeps of one chain in place.

    ``z`` holds standard normals and ``e`` standard exponentials (negated log
    uniforms) for each sweep, one column per parameter. Retained sweeps are
    written to consecutive rows of ``out``; returns the number written.
    """
    n = xbar.shape[0]
    n_moves = step.shape[0]
    i_mu0 = 2 * n
    i_s0 = i_mu0 + 1
    i_nu = i_mu0 + 2
    i_a = i_mu0 + 3
    i_b = i_mu0 + 4
    i_shift = i_mu0 + 5
    i_scale = i_mu0 + 6
    mu0_lo = bounds[0]
    mu0_hi = bounds[1]
    floor = bounds[2]
    si_hi = bounds[3]
    s0_hi = bounds[4]
    a_lo = bounds[5]
    a_hi = bounds[6]
    b_lo = bounds[7]
    b_hi = bounds[8]
    a_coef = r / (1.0 + (r - 1.0) * rho)
    b_coef = 1.0 / (1.0 - rho)
    loc_sign = -1.0 if mirror else 1.0
    tq_new = np.empty(n)
    ll_new_all = np.empty(n)
    mu_new = np.empty(n)
    mu0 = th[i_mu0]
    s0 = th[i_s0]
    nu = th[i_nu]
    alpha = th[i_a]
    beta = th[i_b]
    written = 0

    for b in range(z.shape[0]):
        it = it0 + b
        half = 0.5 * (nu + 1.0)
        # dataset means
        for i in range(n):
            prop = th[i] + loc_sign * step[i] * z[b, i]
            ll_new = _loglik(xbar[i], ss[i], prop, th[n + i], r, a_coef, b_coef)
            zz = (prop - mu0) / s0
            tq_p = math.log1p(zz * zz / nu)
            if -e[b, i] < ll_new - ll[i] - half * (tq_p - tq[i]):
                th[i] = prop
                ll[i] = ll_new
                tq[i] = tq_p
                acc[i] += 1.0
        # dataset scales (log scale)
        for i in range(n):
            k = n + i
            log_ratio = step[k] * z[b, k]
            prop = th[k] * math.exp(log_ratio)
            if prop < floor or prop > si_hi:
                continue
            ll_new = _loglik(xbar[i], ss[i], th[i], prop, r, a_coef, b_coef)
            if -e[b, k] < ll_new - ll[i] + log_ratio:
                th[k] = prop
                ll[i] = ll_new
                acc[k] += 1.0
        # population mean
        prop = mu0 + loc_sign * step[i_mu0] * z[b, i_mu0]
        if mu0_lo < prop < mu0_hi:
            tot = 0.0
            for i in range(n):
                zz = (th[i] - prop) / s0
                tq_new[i] = math.log1p(zz * zz / nu)
                tot += tq_new[i] - tq[i]
            if -e[b, i_mu0] < -half * tot:
                mu0 = prop
                tq[:] = tq_new
                acc[i_mu0] += 1.0
        # population scale (log scale)
        log_ratio = step[i_s0] * z[b, i_s0]
        prop = s0 * math.exp(log_ratio)
        if floor <= prop <= s0_hi:
            tot = 0.0
            for i in range(n):
                zz = (th[i] - mu0) / prop
                tq_new[i] = math.log1p(zz * zz / nu)
                tot += tq_new[i] - tq[i]
            if -e[b, i_s0] < (1.0 - n) * log_ratio - half * tot:
                s0 = prop
                tq[:] = tq_new
                acc[i_s0] += 1.0
        # degrees of freedom (log scale)
        log_ratio = step[i_nu] * z[b, i_nu]
        prop = nu * math.exp(log_ratio)
        sum_old = 0.0
        sum_new = 0.0
        for i in range(n):
            zz = (th[i] - mu0) / s0
            tq_new[i] = math.log1p(zz * zz / prop)
            sum_old += tq[i]
            sum_new += tq_new[i]
        delta = (
            n * (_t_const(prop) - _t_const(nu))
            - 0.5 * (prop + 1.0) * sum_new
            + half * sum_old
            + alpha * log_ratio
            - beta * (prop - nu)
        )
        if -e[b, i_nu] < delta:
            nu = prop
            tq[:] = tq_new
            acc[i_nu] += 1.0
        # Gamma prior shape
        prop = alpha + step[i_a] * z[b, i_a]
        if a_lo < prop < a_hi:
            delta = (prop - alpha) * (math.log(beta) + math.log(nu)) - math.lgamma(prop) + math.lgamma(alpha)
            if -e[b, i_a] < delta:
                alpha = prop
                acc[i_a] += 1.0
        # Gamma prior rate
        prop = beta + step[i_b] * z[b, i_b]
        if b_lo < prop < b_hi:
            if -e[b, i_b] < alpha * math.log(prop / beta) - (prop - beta) * nu:
                beta = prop
                acc[i_b] += 1.0

        # joint translation of mu_0 and every mu_i (t-terms unchanged)
        shift = loc_sign * step[i_shift] * z[b, i_shift]
        prop = mu0 + shift
        if mu0_lo < prop < mu0_hi:
            tot = 0.0
            for i in range(n):
                mu_new[i] = th[i] + shift
                ll_new_all[i] = _loglik(xbar[i], ss[i], mu_new[i], th[n + i], r, a_coef, b_coef)
                tot += ll_new_all[i] - ll[i]
            if -e[b, i_shift] < tot:
                mu0 = prop
                for i in range(n):
                    th[i] = mu_new[i]
                    ll[i] = ll_new_all[i]
                    zz = (th[i] - mu0) / s0
                    tq[i] = math.log1p(zz * zz / nu)
                acc[i_shift] += 1.0
        # joint rescaling of sigma_0 and the mu_i deviations from mu_0
        log_ratio = step[i_scale] * z[b, i_scale]
        lam = math.exp(log_ratio)
        prop = s0 * lam
        if floor <= prop <= s0_hi:
            tot = 0.0
            for i in range(n):
                mu_new[i] = mu0 + lam * (th[i] - mu0)
                ll_new_all[i] = _loglik(xbar[i], ss[i], mu_new[i], th[n + i], r, a_coef, b_coef)
                tot += ll_new_all[i] - ll[i]
            # t-normalizer and the mu Jacobian cancel; the log-scale Jacobian remains
            if -e[b, i_scale] < tot + log_ratio:
                s0 = prop
                for i in range(n):
                    th[i] = mu_new[i]
                    ll[i] = ll_new_all[i]
                    zz = (th[i] - mu0) / s0
                    tq[i] = math.log1p(zz * zz / nu)
                acc[i_scale] += 1.0

        if it < n_burn:
            if (it + 1) % adapt_every == 0:
                for p in range(n_moves):
                    rate = acc[p] / adapt_every
                    if rate < 0.05:
                        step[p] *= 0.5
                    elif rate < ADAPT_LOW:
                        step[p] *= 0.75
                    elif rate > 0.8:
                        step[p] *= 2.0
                    elif rate > ADAPT_HIGH:
                        step[p] *= 1.33
                    acc[p] = 0.0
            if it + 1 == n_burn:
                acc[:] = 0.0
        else:
            th[i_mu0] = mu0
            th[i_s0] = s0
            th[i_nu] = nu
            th[i_a] = alpha
            th[i_b] = beta
            out[written, :] = th
            written += 1
    th[i_mu0] = mu0
    th[i_s0] = s0
    th[i_nu] = nu
    th[i_a] = alpha
    th[i_b] = beta
    return written


@numba.njit(cache=True)
def _chain_caches(xbar, ss, r, rho, th, tq, ll):
    n = xbar.shape[0]
    a_coef = r / (1.0 + (r - 1.0) * rho)
    b_coef = 1.0 / (1.0 - rho)
    mu0 = th[2 * n]
    s0 = th[2 * n + 1]
    nu = th[2 * n + 2]
    for i in range(n):
        ll[i] = _loglik(xbar[i], ss[i], th[i], th[n + i], r, a_coef, b_coef)
        zz = (th[i] - mu0) / s0
        tq[i] = math.log1p(zz * zz / nu)


def _data_summary(x: np.ndarray):
    xbar = x.mean(axis=1)
    ss = ((x - xbar[:, None]) ** 2).sum(axis=1)
    sd = x.std(axis=1, ddof=1)
    return xbar, ss, np.maximum(sd, SIGMA_FLOOR)


def initial_states(x: np.ndarray, priors: HierPriors, chains: int, rng: np.random.Generator, mirror: bool = False):
    """Overdispersed starting points around data-driven estimates."""
    n, r = x.shape
    xbar, _, sd = _data_summary(x)
    sign = -1.0 if mirror else 1.0
    se = sd * math.sqrt((1.0 + (r - 1) * priors.rho) / r)
    lo0, hi0 = priors.mu0_bounds
    width0 = hi0 - lo0
    out = np.empty((chains, 2 * n + 5))
    for c in range(chains):
        mu = xbar + sign * 2.0 * se * rng.standard_normal(n)
        sig = np.clip(sd * np.exp(0.5 * rng.standard_normal(n)), priors.sigma_floor, priors.sigma_i_upper)
        spread = float(mu.std(ddof=1)) if n > 1 else float(se[0])
        mu0 = float(np.mean(mu)) + sign * 2.0 * max(spread, SIGMA_FLOOR) / math.sqrt(n) * rng.standard_normal()
        mu0 = min(max(mu0, lo0 + 1e-6 * width0), hi0 - 1e-6 * width0)
        s0 = max(spread, priors.sigma_floor) * math.exp(0.5 * rng.standard_normal())
        s0 = min(max(s0, priors.sigma_floor), priors.sigma0_upper)
        alpha = rng.uniform(*priors.alpha_bounds)
        beta = rng.uniform(*priors.beta_bounds)
        nu = alpha / beta * math.exp(0.5 * rng.standard_normal())
        out[c] = np.concatenate([mu, sig, [mu0, s0, nu, alpha, beta]])
    return out


def initial_steps(x: np.ndarray, priors: HierPriors) -> np.ndarray:
    n, r = x.shape
    xbar, _, sd = _data_summary(x)
    se = np.maximum(sd * math.sqrt((1.0 + (r - 1) * priors.rho) / r), SIGMA_FLOOR)
    spread = float(xbar.std(ddof=1)) if n > 1 else float(se[0])
    step_mu0 = max(spread / math.sqrt(n), float(se.mean()) / math.sqrt(n), SIGMA_FLOOR)
    return np.concatenate([se, np.full(n, 0.3), [step_mu0, 0.3, 0.5, 1.0, 0.02, step_mu0, 0.3]])


def run_mcmc(
    diffs: PairDifferences | np.ndarray,
    priors: HierPriors,
    config: SamplerConfig = SamplerConfig(),
    seed: int = 0,
    mirror: bool = False,
) -> McmcResult:
    """Sample the hierarchical posterior; deterministic given ``seed``.

    ``mirror`` flips the sign of every location-parameter random increment,
    so running on negated data with ``mirror=True`` reproduces the negated
    chains of the original run exactly.
    """
    x = diffs.per_dataset if isinstance(diffs, PairDifferences) else np.asarray(diffs, dtype=float)
    x = np.ascontiguousarray(x, dtype=float)
    n, r = x.shape
    if r < 2:
        raise ValueError("need at least two folds per dataset")
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), 1]))
    init = initial_states(x, priors, config.chains, rng, mirror)
    steps = initial_steps(x, priors)
    for c in range(config.chains):
        st = HierState.from_vector(init[c])
        if not st.in_support(priors):
            raise ValueError(f"initial state of chain {c} lies outside the prior support")
    xbar, ss, _ = _data_summary(x)
    bounds = np.array(
        [
            priors.mu0_bounds[0], priors.mu0_bounds[1], priors.sigma_floor, priors.sigma_i_upper,
            priors.sigma0_upper, priors.alpha_bounds[0], priors.alpha_bounds[1],
            priors.beta_bounds[0], priors.beta_bounds[1],
        ]
    )
    n_par = 2 * n + 5
    n_moves = n_par + 2
    n_keep = config.draws_per_chain
    n_iter = config.burn_in + n_keep
    draws = np.empty((config.chains, n_keep, n_par))
    acceptance = np.empty((config.chains, n_moves))
    step_sizes = np.empty((config.chains, n_moves))
    stream = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), 2]))
    for c in range(config.chains):
        th = init[c].copy()
        step = steps.copy()
        acc = np.zeros(n_moves)
        tq = np.empty(n)
        ll = np.empty(n)
        _chain_caches(xbar, ss, float(r), float(priors.rho), th, tq, ll)
        pos = 0
        for it0 in range(0, n_iter, BLOCK):
            size = min(BLOCK, n_iter - it0)
            z = stream.standard_normal((size, n_moves))
            e = stream.standard_exponential((size, n_moves))
            pos += _advance(
                xbar, ss, float(r), float(priors.rho), bounds, th, step, acc, tq, ll, z, e,
                it0, config.burn_in, config.adapt_every, bool(mirror), draws[c, pos:],
            )
        acceptance[c] = acc / max(n_keep, 1)
        step_sizes[c] = step
    return McmcResult(draws, acceptance, step_sizes, n, seed)
