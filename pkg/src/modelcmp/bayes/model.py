"""Hierarchical correlated t-test: likelihood, priors and log-posterior.

Reference (numpy/scipy) implementations; the sampler kernel carries its own
compiled incremental versions and is checked against these.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ..perfdata import CvGeometry, PairDifferences

__all__ = [
    "RHO_MAX",
    "SIGMA_FLOOR",
    "HierPriors",
    "HierState",
    "rho_from_cv",
    "cs_gaussian_logpdf",
    "cs_inverse",
    "cs_logdet",
    "student_t_logpdf",
    "hier_log_posterior",
]

RHO_MAX = 1.0 - 1e-3
SIGMA_FLOOR = 1e-6
SCALE_FACTOR = 1000.0
LOG_2PI = math.log(2.0 * math.pi)


def rho_from_cv(geometry: CvGeometry) -> float:
    """Nadeau-Bengio correlation n_test / n_train, clamped below 1."""
    rho = geometry.n_test / geometry.n_train
    if rho >= RHO_MAX:
        warnings.warn(
            f"n_test/n_train = {rho:.4g} makes the fold covariance singular; clamping rho to {RHO_MAX}",
            RuntimeWarning,
            stacklevel=2,
        )
        rho = RHO_MAX
    return rho


def _check_cs(sigma2, rho):
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if not sigma2 > 0.0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")


def cs_logdet(r: int, sigma2: float, rho: float) -> float:
    return r * math.log(sigma2) + (r - 1) * math.log1p(-rho) + math.log1p((r - 1) * rho)


def cs_inverse(r: int, sigma2: float, rho: float) -> np.ndarray:
    """Closed-form inverse of the compound-symmetric covariance."""
    _check_cs(sigma2, rho)
    c = rho / (1.0 + (r - 1) * rho)
    return (np.eye(r) - c * np.ones((r, r))) / (sigma2 * (1.0 - rho))


def cs_gaussian_logpdf(x, mu: float, sigma2: float, rho: float) -> float:
    """Log-density of MVN(mu * 1, sigma2 * [(1 - rho) I + rho J]) at ``x`` in O(r)."""
    _check_cs(sigma2, rho)
    x = np.asarray(x, dtype=float)
    r = x.shape[-1]
    if r < 2:
        raise ValueError("need at least two folds")
    d = x - mu
    s1 = d.sum()
    s2 = np.dot(d, d)
    c = rho / (1.0 + (r - 1) * rho)
    quad = (s2 - c * s1 * s1) / (sigma2 * (1.0 - rho))
    return -0.5 * (r * LOG_2PI + cs_logdet(r, sigma2, rho) + quad)


def student_t_logpdf(x, loc, scale, nu):
    z = (np.asarray(x, dtype=float) - loc) / scale
    return (
        special.gammaln((nu + 1.0) / 2.0)
        - special.gammaln(nu / 2.0)
        - 0.5 * np.log(nu * math.pi)
        - np.log(scale)
        - (nu + 1.0) / 2.0 * np.log1p(z * z / nu)
    )


@dataclass(frozen=True)
class HierPriors:
    """Prior supports of the hierarchical model.

    ``sigma_i_upper`` and ``sigma0_upper`` are data-scaled (1000 times an
    empirical spread); see :meth:`from_differences`.
    """

    sigma_i_upper: float
    sigma0_upper: float
    rho: float
    mu0_bounds: tuple[float, float] = (-1.0, 1.0)
    alpha_bounds: tuple[float, float] = (0.5, 5.0)
    beta_bounds: tuple[float, float] = (0.05, 0.15)
    sigma_floor: float = SIGMA_FLOOR

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        for lo, hi in (self.mu0_bounds, self.alpha_bounds, self.beta_bounds, (self.sigma_floor, self.sigma_i_upper), (self.sigma_floor, self.sigma0_upper)):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"invalid prior bounds ({lo}, {hi})")

    @classmethod
    def from_differences(cls, diffs: PairDifferences | np.ndarray, rho: float, **kwargs) -> "HierPriors":
        x = diffs.per_dataset if isinstance(diffs, PairDifferences) else np.asarray(diffs, dtype=float)
        sds = x.std(axis=1, ddof=1)
        sigma_bar = SCALE_FACTOR * max(float(sds.mean()), SIGMA_FLOOR)
        if x.shape[0] >= 2:
            s0_bar = SCALE_FACTOR * max(float(x.mean(axis=1).std(ddof=1)), SIGMA_FLOOR)
        else:
            s0_bar = sigma_bar
        return cls(sigma_i_upper=sigma_bar, sigma0_upper=s0_bar, rho=rho, **kwargs)

    def as_dict(self) -> dict:
        return {
            "sigma_i_upper": self.sigma_i_upper,
            "sigma0_upper": self.sigma0_upper,
            "rho": self.rho,
            "mu0_bounds": list(self.mu0_bounds),
            "alpha_bounds": list(self.alpha_bounds),
            "beta_bounds": list(self.beta_bounds),
            "sigma_floor": self.sigma_floor,
        }


@dataclass
class HierState:
    mu_i: np.ndarray
    sigma_i: np.ndarray
    mu_0: float
    sigma_0: float
    nu: float
    alpha: float
    beta: float

    PARAM_ORDER = ("mu_0", "sigma_0", "nu", "alpha", "beta")

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [np.asarray(self.mu_i, float), np.asarray(self.sigma_i, float),
             [self.mu_0, self.sigma_0, self.nu, self.alpha, self.beta]]
        )

    @classmethod
    def from_vector(cls, v) -> "HierState":
        v = np.asarray(v, dtype=float)
        n = (len(v) - 5) // 2
        return cls(v[:n].copy(), v[n:2 * n].copy(), *map(float, v[2 * n:]))

    def in_support(self, priors: HierPriors) -> bool:
        lo, hi = priors.mu0_bounds
        return bool(
            lo < self.mu_0 < hi
            and priors.sigma_floor <= self.sigma_0 <= priors.sigma0_upper
            and np.all(np.asarray(self.sigma_i) >= priors.sigma_floor)
            and np.all(np.asarray(self.sigma_i) <= priors.sigma_i_upper)
            and self.nu > 0
            and priors.alpha_bounds[0] < self.alpha < priors.alpha_bounds[1]
            and priors.beta_bounds[0] < self.beta < priors.beta_bounds[1]
            and np.all(np.isfinite(self.mu_i))
        )


def parameter_names(n_datasets: int) -> list[str]:
    return (
        [f"mu_{i + 1}" for i in range(n_datasets)]
        + [f"sigma_{i + 1}" for i in range(n_datasets)]
        + list(HierState.PARAM_ORDER)
    )


def hier_log_posterior(state: HierState, diffs: PairDifferences | np.ndarray, priors: HierPriors) -> float:
    """Unnormalized log-posterior of the hierarchical model; -inf off-support.

    Sum of the compound-symmetric Gaussian likelihood of each dataset's fold
    differences, the Student-t density of each dataset mean around the
    population mean, and the prior log-densities (uniforms contribute their
    constant log-normalizers, nu has a Gamma(shape=alpha, rate=beta) prior).
    """
    x = diffs.per_dataset if isinstance(diffs, PairDifferences) else np.asarray(diffs, dtype=float)
    if not state.in_support(priors):
        return -math.inf
    lik = sum(
        cs_gaussian_logpdf(x[i], state.mu_i[i], state.sigma_i[i] ** 2, priors.rho) for i in range(x.shape[0])
    )
    hier = float(np.sum(student_t_logpdf(state.mu_i, state.mu_0, state.sigma_0, state.nu)))
    a, b = state.alpha, state.beta
    nu_prior = a * math.log(b) - special.gammaln(a) + (a - 1.0) * math.log(state.nu) - b * state.nu
    uniforms = (
        -math.log(priors.mu0_bounds[1] - priors.mu0_bounds[0])
        - math.log(priors.sigma0_upper)
        - x.shape[0] * math.log(priors.sigma_i_upper)
        - math.log(priors.alpha_bounds[1] - priors.alpha_bounds[0])
        - math.log(priors.beta_bounds[1] - priors.beta_bounds[0])
    )
    return float(lik + hier + nu_prior + uniforms)
