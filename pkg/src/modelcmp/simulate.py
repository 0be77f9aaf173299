"""Synthetic fold-level data with known ground truth, and calibration runs."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, replace

import numpy as np
from scipy import stats

from .bayes.evaluate import BayesConfig, compare_differences, verdict_from_theta
from .decisions import ROPE, X_BETTER
from .frequentist import friedman_statistic
from .perfdata import PairDifferences, table_from_arrays
from .ranking import TieError, naive_best, table_ranks

__all__ = [
    "GenSpec",
    "generate_pair_differences",
    "generate_null_table",
    "null_experiment",
    "coverage_experiment",
    "single_dataset_oracle",
]


@dataclass(frozen=True)
class GenSpec:
    n_datasets: int = 20
    n_folds: int = 10
    mu_0: float = 0.0
    sigma_0: float = 0.01
    nu: float = 5.0
    sigma_i_scale: float = 0.02
    rho: float = 1.0 / 9.0
    seed: int = 0

    def __post_init__(self):
        if self.n_datasets < 1 or self.n_folds < 2:
            raise ValueError("need n_datasets >= 1 and n_folds >= 2")
        if not self.nu > 2:
            raise ValueError("nu must exceed 2 so dataset means have finite variance")
        if self.sigma_0 < 0 or self.sigma_i_scale < 0:
            raise ValueError("scales must be nonnegative")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")

    def as_dict(self) -> dict:
        return asdict(self)


def generate_pair_differences(spec: GenSpec) -> tuple[PairDifferences, dict]:
    """Draw one synthetic comparison from the hierarchical generative model.

    Dataset means come from t(mu_0, sigma_0, nu) built as a normal over the
    root of a scaled chi-square; dataset scales are uniform on
    (0.5, 1.5) * sigma_i_scale; fold differences use the compound-symmetric
    factorization mu + sigma * (sqrt(rho) * g + sqrt(1 - rho) * e).
    """
    rng = np.random.default_rng(spec.seed)
    n, r = spec.n_datasets, spec.n_folds
    z = rng.standard_normal(n)
    chi2 = rng.chisquare(spec.nu, size=n)
    mu_i = spec.mu_0 + spec.sigma_0 * z / np.sqrt(chi2 / spec.nu)
    sigma_i = spec.sigma_i_scale * rng.uniform(0.5, 1.5, size=n)
    g = rng.standard_normal((n, 1))
    e = rng.standard_normal((n, r))
    x = mu_i[:, None] + sigma_i[:, None] * (math.sqrt(spec.rho) * g + math.sqrt(1.0 - spec.rho) * e)
    truth = {"mu_0": spec.mu_0, "sigma_0": spec.sigma_0, "nu": spec.nu, "mu_i": mu_i, "sigma_i": sigma_i, "rho": spec.rho}
    diffs = PairDifferences("x", "y", x, tuple(f"d{i + 1}" for i in range(n)))
    return diffs, truth


def generate_null_table(
    n_datasets: int,
    n_models: int,
    n_folds: int,
    seed: int = 0,
    baseline: tuple[float, float] = (0.6, 0.9),
    noise: float = 0.02,
):
    """Table where every model's scores are exchangeable: a shared
    per-dataset baseline plus i.i.d. noise, clipped to [0, 1]."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(*baseline, size=(n_datasets, 1, 1))
    values = np.clip(base + noise * rng.standard_normal((n_datasets, n_models, n_folds)), 0.0, 1.0)
    return table_from_arrays(values)


def _replicate_seeds(seed: int, runs: int) -> list[int]:
    return [int(s.generate_state(1, np.uint64)[0] >> 1) for s in np.random.SeedSequence(seed).spawn(runs)]


def null_experiment(
    runs: int = 1000,
    n_datasets: int = 20,
    n_models: int = 5,
    n_folds: int = 10,
    alpha: float = 0.05,
    seed: int = 0,
) -> dict:
    """Type-I calibration of the Friedman test and of the naive method."""
    if runs < 1:
        raise ValueError("runs must be positive")
    rejections = 0
    unique_best = 0
    for s in _replicate_seeds(seed, runs):
        table = generate_null_table(n_datasets, n_models, n_folds, s)
        if friedman_statistic(table_ranks(table)).p_value < alpha:
            rejections += 1
        try:
            naive_best(table)
            unique_best += 1
        except TieError:
            pass
    return {
        "experiment": "null",
        "runs": runs,
        "n_datasets": n_datasets,
        "n_models": n_models,
        "n_folds": n_folds,
        "alpha": alpha,
        "seed": seed,
        "friedman_rejection_rate": rejections / runs,
        "naive_unique_best_rate": unique_best / runs,
    }


def coverage_experiment(
    spec: GenSpec,
    runs: int = 200,
    seed: int = 0,
    config: BayesConfig = BayesConfig(),
    level: float = 0.9,
    jobs: int | None = 1,
) -> dict:
    """Fit the hierarchical test to ``runs`` synthetic comparisons.

    Reports credible-interval coverage of the true mu_0, decision rates at
    ``config.threshold``, mean theta, and the share of runs whose R-hat
    stayed within the limit. Sampler failures are counted, not raised.
    """
    if runs < 1:
        raise ValueError("runs must be positive")
    lo_q, hi_q = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    config = replace(config, rho=spec.rho)

    def one(s):
        diffs, truth = generate_pair_differences(replace(spec, seed=s))
        try:
            post = compare_differences(diffs, config, seed=s, keep_chains=True)
        except Exception as exc:  # noqa: BLE001 - tallied in the summary
            return {"error": repr(exc)}
        mu0 = post.chains.param("mu_0").reshape(-1)
        lo, hi = np.quantile(mu0, [lo_q, hi_q])
        return {
            "covered": bool(lo <= truth["mu_0"] <= hi),
            "theta": post.theta,
            "verdict": verdict_from_theta(post.theta, config.threshold),
            "max_rhat": post.diagnostics.max_rhat,
            "mu0_mean": float(mu0.mean()),
            "mu0_sd": float(mu0.std(ddof=1)),
        }

    seeds = _replicate_seeds(seed, runs)
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1:
        results = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, seeds))

    ok = [r for r in results if "error" not in r]
    n_ok = max(len(ok), 1)
    thetas = np.array([r["theta"] for r in ok]) if ok else np.zeros((0, 3))
    return {
        "experiment": "coverage",
        "runs": runs,
        "failures": runs - len(ok),
        "errors": [r["error"] for r in results if "error" in r][:10],
        "spec": spec.as_dict(),
        "level": level,
        "rope": config.rope,
        "threshold": config.threshold,
        "coverage": sum(r["covered"] for r in ok) / n_ok,
        "decided_fraction": sum(r["verdict"] != "no_decision" for r in ok) / n_ok,
        "x_better_fraction": sum(r["verdict"] == X_BETTER for r in ok) / n_ok,
        "rope_fraction": sum(r["verdict"] == ROPE for r in ok) / n_ok,
        "mean_theta": thetas.mean(axis=0).tolist() if ok else None,
        "mean_p_rope": float(thetas[:, 1].mean()) if ok else None,
        "rhat_ok_fraction": sum(r["max_rhat"] is not None and r["max_rhat"] <= config.rhat_limit for r in ok) / n_ok,
        "max_rhat": max((r["max_rhat"] for r in ok), default=None),
    }


def single_dataset_oracle(x, rho: float, rope: float) -> tuple[float, float, float]:
    """Closed-form correlated t-test posterior on one dataset.

    The mean difference has a Student posterior with location mean(x),
    squared scale (1/r + rho/(1 - rho)) * var(x) and r - 1 degrees of
    freedom. Returns (P(> rope), P(within rope), P(< -rope)).
    """
    x = np.asarray(x, dtype=float)
    r = x.size
    if r < 2:
        raise ValueError("need at least two folds")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    if var == 0.0:
        if mean > rope:
            return (1.0, 0.0, 0.0)
        if mean < -rope:
            return (0.0, 0.0, 1.0)
        return (0.0, 1.0, 0.0)
    scale = math.sqrt((1.0 / r + rho / (1.0 - rho)) * var)
    above = float(stats.t.sf(rope, r - 1, loc=mean, scale=scale))
    below = float(stats.t.cdf(-rope, r - 1, loc=mean, scale=scale))
    return (above, 1.0 - above - below, below)
