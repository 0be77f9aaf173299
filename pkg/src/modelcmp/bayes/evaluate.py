"""Pairwise posterior comparisons, decision matrices and the Bayesian family."""

from __future__ import annotations

import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..decisions import NO_DECISION, ROPE, X_BETTER, Y_BETTER, DecisionMatrix
from ..perfdata import PairDifferences, PerfTable, pair_differences
from ..ranking import BAYES_NOTE, FamilyOfBest, overall_means
from .diagnostics import RHAT_LIMIT, Diagnostics, diagnostics
from .model import HierPriors, parameter_names
from .sampler import McmcResult, SamplerConfig, run_mcmc

__all__ = [
    "BayesConfig",
    "PairPosterior",
    "posterior_theta",
    "posterior_triples",
    "compare_pair",
    "pair_seed",
    "verdict_from_theta",
    "bayes_decision_matrix",
    "bayes_family",
]

log = logging.getLogger(__name__)

THETA_SOURCES = ("predictive", "mu0", "argmax")


@dataclass(frozen=True)
class BayesConfig:
    rope: float = 0.01
    threshold: float = 0.95
    rho: float = 1.0 / 9.0
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    theta_source: str = "predictive"
    rhat_limit: float = RHAT_LIMIT

    def __post_init__(self):
        if not self.rope > 0:
            raise ValueError("rope half-width must be positive")
        if not 0.5 < self.threshold <= 1.0:
            raise ValueError("decision threshold must lie in (0.5, 1]")
        if self.theta_source not in THETA_SOURCES:
            raise ValueError(f"theta_source must be one of {THETA_SOURCES}")

    def as_dict(self) -> dict:
        return {
            "rope": self.rope,
            "threshold": self.threshold,
            "rho": self.rho,
            "sampler": self.sampler.as_dict(),
            "theta_source": self.theta_source,
            "rhat_limit": self.rhat_limit,
        }


@dataclass
class PairPosterior:
    model_x: str
    model_y: str
    theta: tuple[float, float, float]  # (P(x better), P(rope), P(y better))
    rope_halfwidth: float
    diagnostics: Diagnostics
    seed: int
    mirror: bool
    priors: HierPriors
    mu0_summary: dict
    chains: McmcResult | None = None
    rhat_limit: float = RHAT_LIMIT

    @property
    def p_left(self) -> float:
        return self.theta[0]

    @property
    def p_rope(self) -> float:
        return self.theta[1]

    @property
    def p_right(self) -> float:
        return self.theta[2]

    @property
    def reliable(self) -> bool:
        return self.diagnostics.reliable(self.rhat_limit)

    def summary(self) -> dict:
        return {
            "x": self.model_x,
            "y": self.model_y,
            "theta": list(self.theta),
            "rope": self.rope_halfwidth,
            "seed": self.seed,
            "mirror": self.mirror,
            "max_rhat": self.diagnostics.max_rhat,
            "min_ess": self.diagnostics.min_ess,
            "reliable": self.reliable,
            "mu0": self.mu0_summary,
        }


def _hyper_draws(result: McmcResult):
    return (
        result.param("mu_0").reshape(-1),
        result.param("sigma_0").reshape(-1),
        result.param("nu").reshape(-1),
    )


def _fractions(values: np.ndarray, rope: float) -> tuple[float, float, float]:
    n = values.size
    left = int(np.count_nonzero(values > rope))
    right = int(np.count_nonzero(values < -rope))
    return (left / n, (n - left - right) / n, right / n)


def posterior_triples(result: McmcResult, rope: float) -> np.ndarray:
    """Per-draw (P(x better), P(rope), P(y better)) under t(mu_0, sigma_0, nu)."""
    mu0, s0, nu = _hyper_draws(result)
    above = stats.t.sf((rope - mu0) / s0, nu)
    below = stats.t.cdf((-rope - mu0) / s0, nu)
    inside = np.clip(1.0 - above - below, 0.0, 1.0)
    return np.column_stack([above, inside, below])


def posterior_theta(
    result: McmcResult,
    rope: float,
    seed: int | None = None,
    mirror: bool = False,
    source: str = "predictive",
) -> tuple[float, float, float]:
    """Estimate (P(x better), P(rope), P(y better)).

    ``predictive`` draws one future-dataset mean difference per retained
    draw from t(mu_0, sigma_0, nu) and counts where it lands; ``mu0`` counts
    where mu_0 itself lands; ``argmax`` counts which region carries the
    highest probability under each draw's t distribution.
    """
    if source == "predictive":
        mu0, s0, nu = _hyper_draws(result)
        seed = result.seed if seed is None else seed
        rng = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), 3]))
        t = rng.standard_t(nu)
        if mirror:
            t = -t
        return _fractions(mu0 + s0 * t, rope)
    if source == "mu0":
        return _fractions(result.param("mu_0").reshape(-1), rope)
    if source == "argmax":
        winners = np.argmax(posterior_triples(result, rope), axis=1)
        counts = np.bincount(winners, minlength=3) / winners.size
        return (float(counts[0]), float(counts[1]), float(counts[2]))
    raise ValueError(f"unknown theta source {source!r}")


def pair_seed(seed: int, x: str, y: str) -> int:
    """Seed for the (x, y) comparison: master seed XOR a stable hash of the pair."""
    digest = hashlib.sha256(f"{x}\x1f{y}".encode("utf-8")).digest()
    return (seed ^ int.from_bytes(digest[:8], "big")) & (2**63 - 1)


def _summarize_mu0(result: McmcResult) -> dict:
    mu0 = result.param("mu_0").reshape(-1)
    q05, q50, q95 = np.quantile(mu0, [0.05, 0.5, 0.95])
    return {"mean": float(mu0.mean()), "sd": float(mu0.std(ddof=1)), "q05": float(q05), "median": float(q50), "q95": float(q95)}


def compare_differences(
    diffs: PairDifferences,
    config: BayesConfig = BayesConfig(),
    seed: int = 0,
    mirror: bool = False,
    keep_chains: bool = True,
    priors: HierPriors | None = None,
) -> PairPosterior:
    priors = priors or HierPriors.from_differences(diffs, config.rho)
    result = run_mcmc(diffs, priors, config.sampler, seed=seed, mirror=mirror)
    diag = diagnostics(result.draws, parameter_names(diffs.n_datasets))
    theta = posterior_theta(result, config.rope, seed, mirror, config.theta_source)
    return PairPosterior(
        model_x=diffs.model_x,
        model_y=diffs.model_y,
        theta=theta,
        rope_halfwidth=config.rope,
        diagnostics=diag,
        seed=seed,
        mirror=mirror,
        priors=priors,
        mu0_summary=_summarize_mu0(result),
        chains=result if keep_chains else None,
        rhat_limit=config.rhat_limit,
    )


def compare_pair(
    table: PerfTable,
    x: str,
    y: str,
    config: BayesConfig = BayesConfig(),
    seed: int = 0,
    mirror: bool = False,
    keep_chains: bool = True,
) -> PairPosterior:
    """Fit the hierarchical model to the fold differences of ``x`` minus ``y``."""
    return compare_differences(pair_differences(table, x, y), config, seed, mirror, keep_chains)


def verdict_from_theta(theta, threshold: float) -> str:
    left, rope, right = theta
    if left > threshold:
        return X_BETTER
    if right > threshold:
        return Y_BETTER
    if rope > threshold:
        return ROPE
    return NO_DECISION


@dataclass
class BayesResult:
    matrix: DecisionMatrix
    posteriors: dict[tuple[str, str], PairPosterior]

    def theta(self, x: str, y: str) -> tuple[float, float, float]:
        if (x, y) in self.posteriors:
            return self.posteriors[(x, y)].theta
        left, rope, right = self.posteriors[(y, x)].theta
        return (right, rope, left)


def bayes_decision_matrix(
    table: PerfTable,
    config: BayesConfig = BayesConfig(),
    seed: int = 0,
    jobs: int | None = None,
    keep_chains: bool = False,
    progress=None,
) -> BayesResult:
    """Compare every unordered pair (i < j in table order) and grid the verdicts.

    Each pair gets its own seed from :func:`pair_seed`, so the outcome does
    not depend on ``jobs`` or on scheduling. ``progress`` is called with each
    finished :class:`PairPosterior` (from worker threads); if it raises, the
    remaining pairs are cancelled and the exception propagates.
    """
    models = table.models
    k = len(models)
    if k < 2:
        raise ValueError("need at least two models")
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    jobs = jobs or os.cpu_count() or 1

    def work(pair):
        i, j = pair
        post = compare_pair(table, models[i], models[j], config, pair_seed(seed, models[i], models[j]), keep_chains=keep_chains)
        if progress is not None:
            progress(post)
        return post

    if jobs == 1:
        results = [work(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(work, p) for p in pairs]
            try:
                results = [f.result() for f in futures]
            except BaseException:
                # a failing pair (or a progress hook raising) stops the queue
                for f in futures:
                    f.cancel()
                raise

    matrix = DecisionMatrix.empty(models, config.threshold)
    posteriors = {}
    for (i, j), post in zip(pairs, results):
        posteriors[(models[i], models[j])] = post
        if post.reliable:
            matrix.set(i, j, verdict_from_theta(post.theta, config.threshold))
        else:
            matrix.set(i, j, NO_DECISION)
            matrix.flagged.append((models[i], models[j]))
            log.warning("R-hat %.3f > %.2f for %s vs %s; verdict withheld", post.diagnostics.max_rhat or float("nan"),
                        config.rhat_limit, models[i], models[j])
    return BayesResult(matrix, posteriors)


def bayes_family(matrix: DecisionMatrix, means, higher_is_better: bool = True) -> FamilyOfBest:
    """Top model by overall mean plus every model rope-equivalent to it."""
    means = np.asarray(means, dtype=float)
    score = means if higher_is_better else -means
    models = matrix.models
    tied = [j for j in range(len(models)) if score[j] == score.max()]
    best = min(tied, key=lambda j: models[j])
    members = [best] + [j for j in range(len(models)) if j != best and matrix.cells[best][j] == ROPE]
    members.sort(key=lambda j: (-score[j], j != best, j))
    note = BAYES_NOTE
    if len(tied) > 1:
        note += f"; top mean shared by {', '.join(models[j] for j in tied)}"
    return FamilyOfBest("bayes", tuple(models[j] for j in members), note)


def bayes_family_from_table(table: PerfTable, matrix: DecisionMatrix) -> FamilyOfBest:
    return bayes_family(matrix, overall_means(table), table.higher_is_better)
