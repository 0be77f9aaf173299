import warnings

import numpy as np
import pytest

from modelcmp.bayes.diagnostics import (
    Diagnostics,
    diagnostics,
    effective_sample_size,
    rank_normalized_rhat,
    split_rhat,
)


def ar1(rng, phi, shape):
    c, s = shape
    x = np.empty(shape)
    x[:, 0] = rng.standard_normal(c) / np.sqrt(1 - phi**2)
    e = rng.standard_normal(shape)
    for t in range(1, s):
        x[:, t] = phi * x[:, t - 1] + e[:, t]
    return x


def test_iid_draws(rng):
    d = rng.standard_normal((4, 5000))
    assert split_rhat(d) == pytest.approx(1.0, abs=0.01)
    assert rank_normalized_rhat(d[:, :, None])[0] == pytest.approx(1.0, abs=0.01)
    assert effective_sample_size(d) == pytest.approx(20000, rel=0.1)


def test_ar1_ess_matches_theory(rng):
    phi = 0.9
    d = ar1(rng, phi, (4, 20000))
    theory = d.size * (1 - phi) / (1 + phi)
    assert effective_sample_size(d) == pytest.approx(theory, rel=0.15)


def test_rhat_flags_shifted_chain(rng):
    d = rng.standard_normal((4, 2000))
    d[0] += 2.0
    assert split_rhat(d) > 1.1
    assert rank_normalized_rhat(d[:, :, None])[0] > 1.1


def test_rhat_flags_scale_difference_through_folding(rng):
    d = rng.standard_normal((4, 4000))
    d[0] *= 4.0
    assert rank_normalized_rhat(d[:, :, None])[0] > 1.05


def test_constant_chains():
    same = np.full((4, 100, 1), 0.3)
    assert rank_normalized_rhat(same)[0] == 1.0
    assert effective_sample_size(same)[0] == 400
    diff = np.concatenate([np.zeros((2, 100, 1)), np.ones((2, 100, 1))])
    assert split_rhat(diff)[0] == np.inf


def test_diagnostics_mapping(rng):
    d = rng.standard_normal((4, 1000, 2))
    out = diagnostics(d, ["a", "b"])
    assert isinstance(out, Diagnostics) and set(out) == {"a", "b"}
    assert out.reliable() and out.max_rhat < 1.05 and out.min_ess > 1000


def test_single_chain_has_no_rhat(rng):
    with pytest.warns(RuntimeWarning):
        out = diagnostics(rng.standard_normal((1, 500, 1)))
    assert out.max_rhat is None and not out.reliable()
