import numpy as np
import pytest

from modelcmp.perfdata import table_from_arrays


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def dominant_table():
    """m1 clearly ahead; m2..m4 close to each other."""
    g = np.random.default_rng(1)
    v = 0.7 + 0.03 * g.standard_normal((12, 4, 10))
    v[:, 0] += 0.05
    return table_from_arrays(np.clip(v, 0, 1))


def ranked_values(rank_rows, r=3):
    """Values table (N, k, r) whose per-dataset ranks (1 = best) are ``rank_rows``."""
    ranks = np.asarray(rank_rows, dtype=float)
    vals = 1.0 - ranks / (ranks.shape[1] + 1.0)
    return np.repeat(vals[:, :, None], r, axis=2)
