import pytest
from hypothesis import given, settings, strategies as st

from modelcmp.config import ConfigError, RunConfig, load_config


def test_defaults():
    c = RunConfig()
    assert (c.alpha, c.rope, c.threshold, c.chains, c.draws, c.burn_in) == (0.05, 0.01, 0.95, 4, 50000, 2500)
    assert c.effective_rho() == pytest.approx(1 / 9)
    assert c.bayes_config().sampler.draws_per_chain == 12500


def test_rho_sources():
    assert RunConfig(rho=0.2).effective_rho() == 0.2
    assert RunConfig(cv_train_frac=0.8).effective_rho() == pytest.approx(0.25)
    with pytest.raises(ConfigError):
        RunConfig(rho=0.2, cv_train_frac=0.8)


@pytest.mark.parametrize("kw", [
    {"alpha": 0.0}, {"rope": -1.0}, {"threshold": 0.5}, {"rho": 1.0}, {"chains": 0},
    {"burn_in": -1}, {"draws": 3}, {"seed": -1}, {"jobs": 0}, {"columns": "a,b"}, {"formats": "json,png"},
])
def test_invalid_values(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.001, 0.5), st.floats(1e-4, 0.2), st.floats(0.51, 1.0), st.one_of(st.none(), st.floats(0.01, 0.9)),
    st.integers(1, 8), st.integers(0, 2**40), st.sampled_from(["json", "md,svg", "json,md,svg"]),
    st.one_of(st.none(), st.integers(1, 16)), st.booleans(),
)
def test_text_round_trip(alpha, rope, thr, rho, chains, seed, formats, jobs, force):
    c = RunConfig(input="data/x.csv", alpha=alpha, rope=rope, threshold=thr, rho=rho, chains=chains,
                  draws=chains * 100, seed=seed, formats=formats, jobs=jobs, force_posthoc=force)
    assert RunConfig.from_text(c.to_text()) == c


def test_comments_and_errors():
    c = RunConfig.from_text("# comment\nalpha = 0.1  # inline\n\nburn-in = 10\n")
    assert c.alpha == 0.1 and c.burn_in == 10
    with pytest.raises(ConfigError, match="unknown key"):
        RunConfig.from_text("bogus = 1\n")
    with pytest.raises(ConfigError, match="line 1"):
        RunConfig.from_text("alpha = high\n")
    with pytest.raises(ConfigError):
        RunConfig.from_text("alpha\n")


def test_flags_override_file_and_env_seed(tmp_path, monkeypatch):
    p = tmp_path / "run.cfg"
    p.write_text("rope = 0.02\nchains = 2\n")
    monkeypatch.setenv("MODELCMP_SEED", "77")
    c = load_config(str(p), rope=0.05, chains=None)
    assert c.rope == 0.05 and c.chains == 2 and c.seed == 77
    assert load_config(str(p), seed=3).seed == 3
    p.write_text("seed = 5\n")
    assert load_config(str(p)).seed == 5
    monkeypatch.setenv("MODELCMP_SEED", "x")
    with pytest.raises(ConfigError):
        load_config(None)


def test_result_dict_excludes_io_settings():
    d = RunConfig(out="a", jobs=3, input="b").result_dict()
    assert "out" not in d and "jobs" not in d and "input" not in d and d["rho_effective"] == pytest.approx(1 / 9)
