"""Friedman omnibus test, Nemenyi critical difference and the NHST family."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .decisions import DecisionMatrix, X_BETTER, Y_BETTER
from .ranking import NHST_NOTE, FamilyOfBest, RankMatrix

__all__ = [
    "FriedmanOutcome",
    "NemenyiOutcome",
    "OmnibusRetained",
    "friedman_statistic",
    "chi_square_upper_tail",
    "range_cdf",
    "studentized_range_quantile",
    "nemenyi",
    "nhst_family",
    "nhst_decision_matrix",
]

Z_LIMIT = 12.0
QUAD_TOL = 1e-10
ROOT_TOL = 1e-9
SQRT_2PI = math.sqrt(2.0 * math.pi)


class OmnibusRetained(RuntimeError):
    """The Friedman test did not reject, so the post-hoc family is undefined."""


@dataclass(frozen=True)
class FriedmanOutcome:
    statistic: float
    dof: int
    p_value: float
    n_datasets: int
    n_models: int

    def rejects(self, alpha: float) -> bool:
        return self.p_value < alpha


@dataclass(frozen=True)
class NemenyiOutcome:
    alpha: float
    q_alpha: float
    cd: float
    significant: np.ndarray  # (k, k) bool


def chi_square_upper_tail(x: float, dof: int) -> float:
    """P(X >= x) for X ~ chi-square(dof), via the regularized upper incomplete gamma."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    if dof < 1:
        raise ValueError("dof must be a positive integer")
    return float(special.gammaincc(dof / 2.0, x / 2.0))


def friedman_statistic(ranks: RankMatrix) -> FriedmanOutcome:
    n, k = ranks.n_datasets, ranks.n_models
    if n < 2 or k < 2:
        raise ValueError(f"Friedman test needs N >= 2 and k >= 2, got N={n}, k={k}")
    r = np.asarray(ranks.avg_ranks, dtype=float)
    stat = 12.0 * n / (k * (k + 1)) * (np.sum(r**2) - k * (k + 1) ** 2 / 4.0)
    # Exact-null configurations can land a few ulps below zero.
    stat = max(float(stat), 0.0)
    if np.allclose(r, (k + 1) / 2.0, rtol=0, atol=1e-12):
        stat = 0.0
    return FriedmanOutcome(stat, k - 1, chi_square_upper_tail(stat, k - 1), n, k)


def _gap(z, r):
    # Phi(z) - Phi(z - r), evaluated on the tail that avoids cancellation.
    upper = special.ndtr(r - z) - special.ndtr(-z)
    lower = special.ndtr(z) - special.ndtr(z - r)
    return np.where(z > r / 2.0, upper, lower)


def range_cdf(r: float, k: int) -> float:
    """CDF of the range of ``k`` independent standard normals at ``r``."""
    if r <= 0:
        return 0.0

    def integrand(z):
        return k * math.exp(-0.5 * z * z) / SQRT_2PI * float(_gap(z, r)) ** (k - 1)

    val, _ = integrate.quad(
        integrand, -Z_LIMIT, Z_LIMIT, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=500, points=[0.0, r]
    )
    return min(max(val, 0.0), 1.0)


@lru_cache(maxsize=512)
def _quantile(k: int, alpha: float) -> float:
    target = 1.0 - alpha
    hi = 4.0
    while range_cdf(hi, k) < target:
        hi *= 2.0
    root = optimize.brentq(lambda r: range_cdf(r, k) - target, 0.0, hi, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps)
    return root / math.sqrt(2.0)


def studentized_range_quantile(k: int, alpha: float = 0.05) -> float:
    """Nemenyi critical value q_alpha: upper-alpha quantile of the range of ``k``
    standard normals (infinite error dof), divided by sqrt(2)."""
    if int(k) != k or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return _quantile(int(k), float(alpha))


def nemenyi(ranks: RankMatrix, alpha: float = 0.05) -> NemenyiOutcome:
    n, k = ranks.n_datasets, ranks.n_models
    if n < 2 or k < 2:
        raise ValueError(f"Nemenyi test needs N >= 2 and k >= 2, got N={n}, k={k}")
    q = studentized_range_quantile(k, alpha)
    cd = q * math.sqrt(k * (k + 1) / (6.0 * n))
    r = np.asarray(ranks.avg_ranks, dtype=float)
    sig = np.abs(r[:, None] - r[None, :]) > cd
    np.fill_diagonal(sig, False)
    return NemenyiOutcome(alpha, q, cd, sig)


def top_ranked(avg_ranks, models) -> tuple[int, list[str]]:
    """Index of f_1 and the list of models tied with it (lexicographic pick)."""
    avg = np.asarray(avg_ranks, dtype=float)
    tied = [j for j in range(len(avg)) if avg[j] == avg.min()]
    best = min(tied, key=lambda j: models[j])
    return best, [models[j] for j in tied]


def nhst_family(
    ranks: RankMatrix,
    outcome: NemenyiOutcome,
    models,
    friedman: FriedmanOutcome | None = None,
    force: bool = False,
) -> FamilyOfBest:
    """Top-ranked model plus every model within the critical difference of it.

    If ``friedman`` is given and did not reject at ``outcome.alpha`` the family
    is undefined and :class:`OmnibusRetained` is raised, unless ``force``.
    """
    if friedman is None:
        friedman = friedman_statistic(ranks)
    if not friedman.rejects(outcome.alpha):
        if not force:
            raise OmnibusRetained(
                f"omnibus retained H0: Friedman p = {friedman.p_value:.4g} >= alpha = {outcome.alpha}"
            )
        warnings.warn("forcing post-hoc analysis although the Friedman test did not reject", stacklevel=2)
    avg = np.asarray(ranks.avg_ranks, dtype=float)
    best, tied = top_ranked(avg, models)
    members = [j for j in range(len(avg)) if j == best or avg[j] - avg[best] < outcome.cd]
    members.sort(key=lambda j: (avg[j], j != best, j))
    note = NHST_NOTE
    if len(tied) > 1:
        note += f"; top rank shared by {', '.join(tied)}"
    return FamilyOfBest("nhst", tuple(models[j] for j in members), note)


def nhst_decision_matrix(ranks: RankMatrix, outcome: NemenyiOutcome, models) -> DecisionMatrix:
    """Binary verdicts: significant rank gaps decide, the rest stay undecided."""
    avg = np.asarray(ranks.avg_ranks, dtype=float)
    dm = DecisionMatrix.empty(models)
    k = len(models)
    for i in range(k):
        for j in range(i + 1, k):
            if outcome.significant[i, j]:
                dm.set(i, j, X_BETTER if avg[i] < avg[j] else Y_BETTER)
    return dm
