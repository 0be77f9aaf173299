import math

import numpy as np
import pytest
from scipy import integrate, stats

import modelcmp.simulate as sim
from modelcmp.bayes.evaluate import BayesConfig
from modelcmp.bayes.sampler import SamplerConfig
from modelcmp.ranking import TieError, naive_best
from modelcmp.simulate import (
    GenSpec,
    coverage_experiment,
    generate_null_table,
    generate_pair_differences,
    null_experiment,
    single_dataset_oracle,
)


def test_genspec_validation():
    for kw in ({"nu": 2.0}, {"sigma_0": -1.0}, {"rho": 1.0}, {"n_folds": 1}):
        with pytest.raises(ValueError):
            GenSpec(**kw)


def test_generator_deterministic_and_seed_sensitive():
    a, _ = generate_pair_differences(GenSpec(seed=3))
    b, _ = generate_pair_differences(GenSpec(seed=3))
    c, _ = generate_pair_differences(GenSpec(seed=4))
    assert np.array_equal(a.per_dataset, b.per_dataset)
    assert not np.array_equal(a.per_dataset, c.per_dataset)


def test_noiseless_limit():
    d, _ = generate_pair_differences(GenSpec(mu_0=0.03, sigma_0=0.0, sigma_i_scale=0.0))
    assert np.allclose(d.per_dataset, 0.03, atol=1e-15)


def test_covariance_matches_compound_symmetry():
    # 100,000 replicate datasets; sigma_i ~ U(0.5, 1.5) * s so E[sigma_i^2] = 13/12 s^2
    spec = GenSpec(n_datasets=100_000, sigma_0=0.0, sigma_i_scale=0.02, seed=11)
    d, truth = generate_pair_differences(spec)
    x = d.per_dataset - truth["mu_i"][:, None]
    cov = np.cov(x, rowvar=False)
    es2 = 0.02**2 * 13 / 12
    off = cov[~np.eye(spec.n_folds, dtype=bool)].mean()
    assert off == pytest.approx(spec.rho * es2, rel=0.02)
    assert np.diag(cov).mean() == pytest.approx(es2, rel=0.02)


def test_dataset_means_converge_to_mu0():
    spec = GenSpec(n_datasets=100_000, mu_0=0.04, sigma_0=0.01, nu=5.0, seed=2)
    d, _ = generate_pair_differences(spec)
    means = d.per_dataset.mean(axis=1)
    se = means.std(ddof=1) / math.sqrt(len(means))
    assert abs(means.mean() - 0.04) < 4 * se


def test_null_table_exchangeable():
    # each model is the naive winner equally often
    wins = np.zeros(4)
    for s in range(400):
        t = generate_null_table(10, 4, 5, seed=s)
        try:
            wins[t.model_index(naive_best(t).best)] += 1
        except TieError:
            pass
    assert stats.chisquare(wins).pvalue > 0.001


def test_null_table_shape_and_bounds():
    t = generate_null_table(5, 3, 4, seed=0)
    assert t.values.shape == (5, 3, 4)
    assert t.values.min() >= 0.0 and t.values.max() <= 1.0


def test_null_experiment_summary():
    out = null_experiment(runs=200, seed=1)
    assert 0.0 <= out["friedman_rejection_rate"] <= 0.12
    assert out["naive_unique_best_rate"] > 0.99
    with pytest.raises(ValueError):
        null_experiment(runs=0)


def test_coverage_experiment_counts_failures(monkeypatch):
    real = sim.compare_differences
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 2:
            raise RuntimeError("boom")
        return real(*args, **kwargs)

    monkeypatch.setattr(sim, "compare_differences", flaky)
    cfg = BayesConfig(sampler=SamplerConfig(chains=4, total_draws=4000, burn_in=500))
    out = coverage_experiment(GenSpec(mu_0=0.3), runs=3, seed=0, config=cfg)
    assert out["failures"] == 1 and "boom" in out["errors"][0]
    assert 0.0 <= out["coverage"] <= 1.0
    assert out["x_better_fraction"] == 1.0


def _quadrature_theta(x, rho, rope):
    r = len(x)
    m, s = np.mean(x), np.std(x, ddof=1)
    scale = math.sqrt((1 / r + rho / (1 - rho)) * s * s)
    dens = lambda t: math.gamma(r / 2) / (math.gamma((r - 1) / 2) * math.sqrt((r - 1) * math.pi) * scale) * (
        1 + ((t - m) / scale) ** 2 / (r - 1)) ** (-r / 2)
    lo = integrate.quad(dens, -np.inf, -rope, epsabs=1e-12)[0]
    mid = integrate.quad(dens, -rope, rope, epsabs=1e-12, points=[m])[0]
    hi = integrate.quad(dens, rope, np.inf, epsabs=1e-12)[0]
    return hi, mid, lo


@pytest.mark.parametrize("seed", range(5))
def test_oracle_matches_quadrature(seed):
    x = np.random.default_rng(seed).normal(0.005, 0.02, 10)
    got = single_dataset_oracle(x, 1 / 9, 0.01)
    assert np.allclose(got, _quadrature_theta(x, 1 / 9, 0.01), atol=1e-6)


def test_oracle_symmetry_and_limits():
    x = np.array([-0.03, -0.01, 0.01, 0.03])
    left, _, right = single_dataset_oracle(x, 0.1, 0.01)
    assert left == right
    big = 0.5 + 1e-6 * np.random.default_rng(0).standard_normal(200)
    assert single_dataset_oracle(big, 1e-6, 0.01)[0] > 0.999999
    assert single_dataset_oracle(np.zeros(5), 0.1, 0.01) == (0.0, 1.0, 0.0)
    assert single_dataset_oracle(np.full(5, -0.2), 0.1, 0.01) == (0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        single_dataset_oracle(np.zeros(1), 0.1, 0.01)
