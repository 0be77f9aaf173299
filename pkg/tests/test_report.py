import json

import numpy as np
import pytest

from conftest import ranked_values
from modelcmp.bayes.evaluate import BayesConfig
from modelcmp.bayes.sampler import SamplerConfig
from modelcmp.perfdata import table_from_arrays
from modelcmp.report import build_report, emit_report, parse_report

FAST = BayesConfig(sampler=SamplerConfig(chains=4, total_draws=6000, burn_in=800))
TOP_KEYS = ["meta", "naive", "friedman", "bayes"]


def test_frequentist_only_report(dominant_table):
    bundle, res = build_report(dominant_table, "0" * 64, 5, {"alpha": 0.05})
    assert res is None
    d = json.loads(emit_report(bundle, "json"))
    assert list(d) == TOP_KEYS and d["bayes"] is None
    assert set(d["meta"]) >= {"input_sha256", "seed", "config", "version"}
    assert set(d["friedman"]) >= {"statistic", "dof", "p_value", "alpha", "q_alpha", "cd", "avg_ranks", "family"}
    assert parse_report(emit_report(bundle, "json")) == bundle


def test_full_report_round_trip_and_layout(dominant_table):
    bundle, _ = build_report(dominant_table, "ab" * 32, 5, {"x": 1}, bayes=FAST, jobs=1)
    text = emit_report(bundle, "json")
    back = parse_report(text)
    assert back == bundle
    assert emit_report(back, "json") == text
    d = json.loads(text)
    b = d["bayes"]
    assert len(b["decisions"]) == 4 and all(len(row) == 4 for row in b["decisions"])
    assert set(b["families"]) == {"naive", "nhst", "bayes"}
    assert len(b["theta_summaries"]) == 6
    md = emit_report(bundle, "md")
    assert "| Algorithm | Avg. Rank | Avg. AUC | Diff. In Ranks | Diff. In AUC |" in md
    assert back.friedman.nemenyi.cd == bundle.friedman.nemenyi.cd
    assert np.array_equal(back.friedman.nemenyi.significant, bundle.friedman.nemenyi.significant)


def test_retained_omnibus_leaves_family_undefined():
    t = table_from_arrays(np.full((4, 3, 3), 0.5))
    bundle, _ = build_report(t, "0" * 64, 0, {})
    d = bundle.to_dict()
    assert d["friedman"]["statistic"] == 0.0 and d["friedman"]["p_value"] == 1.0
    assert d["friedman"]["family"] is None and d["friedman"]["family_status"].startswith("undefined")
    assert d["naive"]["family"] is None and d["naive"]["tie"] == ["m1", "m2", "m3"]
    assert "undefined" in emit_report(bundle, "md")


def test_forced_posthoc_family():
    t = table_from_arrays(ranked_values([[1, 2, 3], [3, 1, 2], [2, 3, 1]]))
    with pytest.warns(UserWarning):
        bundle, _ = build_report(t, "0" * 64, 0, {}, force_posthoc=True)
    assert bundle.friedman.family is not None and bundle.friedman.family_status.startswith("forced")


def test_lower_is_better_markdown_diffs():
    vals = np.zeros((6, 3, 3))
    vals[:, 0], vals[:, 1], vals[:, 2] = 0.3, 0.1, 0.2
    t = table_from_arrays(vals, metric_name="RMSE", higher_is_better=False)
    bundle, _ = build_report(t, "0" * 64, 0, {})
    md = emit_report(bundle, "md")
    assert "| m2 | 1.00 | 0.1000 | 0.00 | 0.0000 |" in md
    assert "| m1 | 3.00 | 0.3000 | 2.00 | 0.2000 |" in md


def test_unknown_format(dominant_table):
    bundle, _ = build_report(dominant_table, "0" * 64, 0, {})
    with pytest.raises(ValueError):
        emit_report(bundle, "html")
