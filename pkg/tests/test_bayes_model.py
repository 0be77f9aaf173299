import math

import numpy as np
import pytest
from scipy import stats

from modelcmp.bayes.model import (
    RHO_MAX,
    HierPriors,
    HierState,
    cs_gaussian_logpdf,
    cs_inverse,
    cs_logdet,
    hier_log_posterior,
    rho_from_cv,
    student_t_logpdf,
)
from modelcmp.perfdata import CvGeometry


def dense_cov(r, sigma2, rho):
    return sigma2 * ((1 - rho) * np.eye(r) + rho * np.ones((r, r)))


def test_closed_form_inverse_and_logdet(rng):
    for _ in range(50):
        r = int(rng.integers(2, 21))
        s2 = float(np.exp(rng.uniform(-5, 3)))
        rho = float(rng.uniform(0.01, 0.95))
        cov = dense_cov(r, s2, rho)
        assert np.allclose(cs_inverse(r, s2, rho) @ cov, np.eye(r), atol=1e-10)
        assert cs_logdet(r, s2, rho) == pytest.approx(np.linalg.slogdet(cov)[1], abs=1e-10)


def test_logpdf_matches_scipy(rng):
    for _ in range(50):
        r = int(rng.integers(2, 12))
        s2 = float(np.exp(rng.uniform(-4, 1)))
        rho = float(rng.uniform(0.01, 0.9))
        mu = float(rng.normal())
        x = mu + rng.normal(size=r)
        ref = stats.multivariate_normal(np.full(r, mu), dense_cov(r, s2, rho)).logpdf(x)
        assert cs_gaussian_logpdf(x, mu, s2, rho) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_logpdf_input_checks():
    with pytest.raises(ValueError):
        cs_gaussian_logpdf(np.zeros(3), 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        cs_gaussian_logpdf(np.zeros(3), 0.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        cs_gaussian_logpdf(np.zeros(1), 0.0, 1.0, 0.1)


def test_student_t_logpdf_matches_scipy():
    x = np.linspace(-3, 3, 13)
    assert np.allclose(student_t_logpdf(x, 0.2, 0.7, 4.5), stats.t.logpdf(x, 4.5, loc=0.2, scale=0.7))


def test_rho_from_cv_and_clamp():
    assert rho_from_cv(CvGeometry.k_fold(10)) == pytest.approx(1 / 9)
    with pytest.warns(RuntimeWarning):
        assert rho_from_cv(CvGeometry(1.0, 1.0)) == RHO_MAX


def test_priors_from_differences():
    x = np.array([[0.0, 0.02, 0.04], [0.1, 0.12, 0.14]])
    p = HierPriors.from_differences(x, 0.1)
    assert p.sigma_i_upper == pytest.approx(1000 * 0.02)
    assert p.sigma0_upper == pytest.approx(1000 * np.std([0.02, 0.12], ddof=1))
    zero = HierPriors.from_differences(np.zeros((3, 4)), 0.1)
    assert zero.sigma_i_upper > zero.sigma_floor and zero.sigma0_upper > zero.sigma_floor
    one = HierPriors.from_differences(x[:1], 0.1)
    assert one.sigma0_upper == one.sigma_i_upper
    with pytest.raises(ValueError):
        HierPriors(1.0, 1.0, rho=1.0)


def test_state_vector_round_trip():
    st = HierState(np.array([0.1, 0.2]), np.array([0.3, 0.4]), 0.0, 0.05, 4.0, 2.0, 0.1)
    back = HierState.from_vector(st.to_vector())
    assert np.array_equal(back.to_vector(), st.to_vector())


def test_log_posterior_against_direct_sum(rng):
    n, r, rho = 3, 5, 0.2
    x = rng.normal(0.02, 0.05, (n, r))
    pri = HierPriors.from_differences(x, rho)
    st = HierState(x.mean(axis=1), x.std(axis=1, ddof=1), 0.01, 0.03, 6.0, 2.0, 0.1)
    direct = sum(stats.multivariate_normal(np.full(r, st.mu_i[i]), dense_cov(r, st.sigma_i[i] ** 2, rho)).logpdf(x[i])
                 for i in range(n))
    direct += stats.t.logpdf(st.mu_i, st.nu, loc=st.mu_0, scale=st.sigma_0).sum()
    direct += stats.gamma.logpdf(st.nu, st.alpha, scale=1 / st.beta)
    direct += stats.uniform.logpdf(st.mu_0, -1, 2) + stats.uniform.logpdf(st.alpha, 0.5, 4.5)
    direct += stats.uniform.logpdf(st.beta, 0.05, 0.1)
    direct += -math.log(pri.sigma0_upper) - n * math.log(pri.sigma_i_upper)
    assert hier_log_posterior(st, x, pri) == pytest.approx(direct, rel=1e-10)


def test_log_posterior_off_support(rng):
    x = rng.normal(size=(2, 4))
    pri = HierPriors.from_differences(x, 0.1)
    st = HierState(np.zeros(2), np.ones(2), 1.5, 0.1, 3.0, 2.0, 0.1)
    assert hier_log_posterior(st, x, pri) == -math.inf
