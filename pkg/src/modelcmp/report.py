"""Unified report: the three methods' families side by side, as JSON or Markdown.

JSON layout (top-level keys):

``meta``
    input_sha256, seed, config (result-determining settings only), version,
    metric, higher_is_better, models
``naive``
    family (``{method, members, note}`` or null on a tie), tie, means
``friedman``
    statistic, dof, p_value, n_datasets, n_models, alpha, q_alpha, cd,
    avg_ranks, family (null when undefined), family_status
``bayes``
    null for frequentist-only runs, else threshold, rope, models,
    decisions (k x k verdict strings, row model vs column model),
    decided_fraction, theta_summaries, families (naive / nhst / bayes member
    lists side by side), family, diagnostics_flags

Floats are written with shortest round-trip precision; non-finite floats
(possible only in diagnostics) are written as null.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bayes.evaluate import BayesConfig, BayesResult, bayes_decision_matrix, bayes_family
from .decisions import DecisionMatrix
from .frequentist import (
    FriedmanOutcome,
    NemenyiOutcome,
    OmnibusRetained,
    friedman_statistic,
    nemenyi,
    nhst_family,
)
from .perfdata import PerfTable
from .ranking import FamilyOfBest, TieError, naive_best, overall_means, table_ranks

__all__ = [
    "Provenance",
    "NaiveSection",
    "FriedmanSection",
    "BayesSection",
    "ReportBundle",
    "naive_section",
    "friedman_section",
    "bayes_section",
    "build_report",
    "emit_report",
    "parse_report",
    "sha256_bytes",
]


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _family_dict(fam: FamilyOfBest | None):
    if fam is None:
        return None
    return {"method": fam.method, "members": list(fam.members), "note": fam.epistemic_note}


def _family_from(d) -> FamilyOfBest | None:
    if d is None:
        return None
    return FamilyOfBest(d["method"], tuple(d["members"]), d["note"])


def _clean(obj):
    """Recursively convert numpy scalars and non-finite floats for strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class Provenance:
    input_sha256: str
    seed: int
    config: dict
    version: str = __version__


@dataclass
class NaiveSection:
    means: dict[str, float]
    family: FamilyOfBest | None
    tie: tuple[str, ...] | None = None


@dataclass
class FriedmanSection:
    outcome: FriedmanOutcome
    alpha: float
    avg_ranks: dict[str, float]
    nemenyi: NemenyiOutcome | None
    family: FamilyOfBest | None
    family_status: str


@dataclass
class BayesSection:
    threshold: float
    rope: float
    matrix: DecisionMatrix
    theta_summaries: list[dict]
    family: FamilyOfBest
    families: dict[str, list[str] | None]
    diagnostics_flags: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class ReportBundle:
    meta: Provenance
    models: tuple[str, ...]
    metric: str
    higher_is_better: bool
    naive: NaiveSection
    friedman: FriedmanSection
    bayes: BayesSection | None = None

    def to_dict(self) -> dict:
        fr = self.friedman
        nm = fr.nemenyi
        out = {
            "meta": {
                "input_sha256": self.meta.input_sha256,
                "seed": self.meta.seed,
                "config": self.meta.config,
                "version": self.meta.version,
                "metric": self.metric,
                "higher_is_better": self.higher_is_better,
                "models": list(self.models),
            },
            "naive": {
                "family": _family_dict(self.naive.family),
                "tie": list(self.naive.tie) if self.naive.tie is not None else None,
                "means": dict(self.naive.means),
            },
            "friedman": {
                "statistic": fr.outcome.statistic,
                "dof": fr.outcome.dof,
                "p_value": fr.outcome.p_value,
                "n_datasets": fr.outcome.n_datasets,
                "n_models": fr.outcome.n_models,
                "alpha": fr.alpha,
                "q_alpha": nm.q_alpha if nm is not None else None,
                "cd": nm.cd if nm is not None else None,
                "avg_ranks": dict(fr.avg_ranks),
                "family": _family_dict(fr.family),
                "family_status": fr.family_status,
            },
            "bayes": None,
        }
        if self.bayes is not None:
            b = self.bayes
            out["bayes"] = {
                "threshold": b.threshold,
                "rope": b.rope,
                "models": list(b.matrix.models),
                "decisions": [list(row) for row in b.matrix.cells],
                "decided_fraction": b.matrix.decided_fraction(),
                "theta_summaries": b.theta_summaries,
                "families": b.families,
                "family": _family_dict(b.family),
                "diagnostics_flags": [list(p) for p in b.diagnostics_flags],
            }
        return _clean(out)

    @classmethod
    def from_dict(cls, d: dict) -> "ReportBundle":
        meta = d["meta"]
        fr = d["friedman"]
        outcome = FriedmanOutcome(fr["statistic"], fr["dof"], fr["p_value"], fr["n_datasets"], fr["n_models"])
        ranks = np.array(list(fr["avg_ranks"].values()), dtype=float)
        nm = None
        if fr["cd"] is not None:
            sig = np.abs(ranks[:, None] - ranks[None, :]) > fr["cd"]
            np.fill_diagonal(sig, False)
            nm = NemenyiOutcome(fr["alpha"], fr["q_alpha"], fr["cd"], sig)
        bayes = None
        if d.get("bayes") is not None:
            b = d["bayes"]
            flags = [tuple(p) for p in b["diagnostics_flags"]]
            matrix = DecisionMatrix(tuple(b["models"]), [list(r) for r in b["decisions"]], b["threshold"], list(flags))
            bayes = BayesSection(b["threshold"], b["rope"], matrix, b["theta_summaries"], _family_from(b["family"]),
                                 b["families"], flags)
        return cls(
            meta=Provenance(meta["input_sha256"], meta["seed"], meta["config"], meta["version"]),
            models=tuple(meta["models"]),
            metric=meta["metric"],
            higher_is_better=meta["higher_is_better"],
            naive=NaiveSection(d["naive"]["means"], _family_from(d["naive"]["family"]),
                               tuple(d["naive"]["tie"]) if d["naive"]["tie"] is not None else None),
            friedman=FriedmanSection(outcome, fr["alpha"], fr["avg_ranks"], nm, _family_from(fr["family"]),
                                     fr["family_status"]),
            bayes=bayes,
        )

    def __eq__(self, other):
        if not isinstance(other, ReportBundle):
            return NotImplemented
        return self.to_dict() == other.to_dict()


# ---------------------------------------------------------------- sections


def naive_section(table: PerfTable) -> NaiveSection:
    means = overall_means(table)
    means_d = {m: float(v) for m, v in zip(table.models, means)}
    try:
        return NaiveSection(means_d, naive_best(table))
    except TieError as exc:
        return NaiveSection(means_d, None, tuple(exc.tied))


def friedman_section(table: PerfTable, alpha: float = 0.05, force: bool = False) -> FriedmanSection:
    ranks = table_ranks(table)
    outcome = friedman_statistic(ranks)
    avg = {m: float(v) for m, v in zip(table.models, ranks.avg_ranks)}
    nm = nemenyi(ranks, alpha) if ranks.n_datasets >= 2 else None
    if nm is None:
        return FriedmanSection(outcome, alpha, avg, None, None, "undefined: the post-hoc test needs at least two datasets")
    try:
        fam = nhst_family(ranks, nm, table.models, outcome, force=force)
        status = "defined" if outcome.rejects(alpha) else "forced: omnibus test did not reject"
    except OmnibusRetained as exc:
        fam, status = None, f"undefined: {exc}"
    return FriedmanSection(outcome, alpha, avg, nm, fam, status)


def bayes_section(
    table: PerfTable,
    config: BayesConfig,
    seed: int,
    naive: NaiveSection | None = None,
    friedman: FriedmanSection | None = None,
    jobs: int | None = None,
    progress=None,
    keep_chains: bool = False,
) -> tuple[BayesSection, BayesResult]:
    result = bayes_decision_matrix(table, config, seed=seed, jobs=jobs, keep_chains=keep_chains, progress=progress)
    fam = bayes_family(result.matrix, overall_means(table), table.higher_is_better)
    families = {
        "naive": list(naive.family.members) if naive is not None and naive.family is not None else None,
        "nhst": list(friedman.family.members) if friedman is not None and friedman.family is not None else None,
        "bayes": list(fam.members),
    }
    summaries = [post.summary() for post in result.posteriors.values()]
    section = BayesSection(config.threshold, config.rope, result.matrix, summaries, fam, families,
                           list(result.matrix.flagged))
    return section, result


def build_report(
    table: PerfTable,
    input_sha256: str,
    seed: int,
    config: dict,
    alpha: float = 0.05,
    force_posthoc: bool = False,
    bayes: BayesConfig | None = None,
    jobs: int | None = None,
    progress=None,
    keep_chains: bool = False,
) -> tuple[ReportBundle, BayesResult | None]:
    """Run all methods (Bayes only when ``bayes`` is given) and bundle them."""
    naive = naive_section(table)
    fr = friedman_section(table, alpha, force_posthoc)
    bsec, bres = (None, None)
    if bayes is not None:
        bsec, bres = bayes_section(table, bayes, seed, naive, fr, jobs, progress, keep_chains)
    bundle = ReportBundle(Provenance(input_sha256, seed, config), tuple(table.models), table.metric_name,
                          table.higher_is_better, naive, fr, bsec)
    return bundle, bres


# ---------------------------------------------------------------- emitters


def _fmt(v, digits=4) -> str:
    if v is None:
        return "n/a"
    return f"{round(v, digits) + 0.0:.{digits}f}"  # + 0.0 drops negative zero


def _family_table(members, bundle: ReportBundle, ref: str) -> list[str]:
    """Rows with the five-column ranking layout, differences taken against ``ref``."""
    metric = bundle.metric
    ranks, means = bundle.friedman.avg_ranks, bundle.naive.means
    sign = 1.0 if bundle.higher_is_better else -1.0
    lines = [
        f"| Algorithm | Avg. Rank | Avg. {metric} | Diff. In Ranks | Diff. In {metric} |",
        "|---|---:|---:|---:|---:|",
    ]
    for m in members:
        d_rank = ranks[m] - ranks[ref]
        d_metric = sign * (means[ref] - means[m])
        lines.append(f"| {m} | {_fmt(ranks[m], 2)} | {_fmt(means[m])} | {_fmt(d_rank, 2)} | {_fmt(d_metric)} |")
    return lines


def _markdown(bundle: ReportBundle) -> str:
    nv, fr, by = bundle.naive, bundle.friedman, bundle.bayes
    out = ["# Model comparison report", ""]
    out += [
        f"- metric: {bundle.metric} ({'higher' if bundle.higher_is_better else 'lower'} is better)",
        f"- models: {len(bundle.models)}, datasets: {fr.outcome.n_datasets}",
        f"- input sha256: `{bundle.meta.input_sha256}`",
        f"- seed: {bundle.meta.seed}, version: {bundle.meta.version}",
        "",
        "## Families of best models",
        "",
        "| Method | Size | Members |",
        "|---|---:|---|",
    ]
    rows = [("naive", nv.family.members if nv.family else None),
            ("NHST (Friedman + Nemenyi)", fr.family.members if fr.family else None)]
    if by is not None:
        rows.append(("Bayes (ROPE)", by.family.members))
    for name, members in rows:
        if members is None:
            out.append(f"| {name} | - | undefined |")
        else:
            out.append(f"| {name} | {len(members)} | {', '.join(members)} |")
    out.append("")

    out += ["## Naive average", ""]
    if nv.family is not None:
        out.append(f"Best by average {bundle.metric}: **{nv.family.best}**. {nv.family.epistemic_note}.")
    else:
        out.append(f"Tie for the best average {bundle.metric}: {', '.join(nv.tie)}.")
    out.append("")

    out += ["## Friedman test and Nemenyi post-hoc", ""]
    o = fr.outcome
    out.append(f"Friedman statistic {o.statistic:.4f} on {o.dof} dof, p = {o.p_value:.4g} (alpha = {fr.alpha}).")
    if fr.nemenyi is not None:
        out.append(f"q_alpha = {fr.nemenyi.q_alpha:.4f}, critical difference CD = {fr.nemenyi.cd:.4f}.")
    out.append(f"Family status: {fr.family_status}.")
    out.append("")
    order = sorted(bundle.models, key=lambda m: (fr.avg_ranks[m], m))
    if fr.family is not None:
        out += ["### NHST family", ""] + _family_table(fr.family.members, bundle, fr.family.best) + [""]
    out += ["### All models by average rank", ""] + _family_table(order, bundle, order[0]) + [""]

    if by is not None:
        out += ["## Hierarchical Bayesian comparison", ""]
        out.append(f"ROPE = +/-{by.rope}, decision threshold {by.threshold}; "
                   f"{100 * by.matrix.decided_fraction():.2f}% of pairs decided.")
        if by.diagnostics_flags:
            out.append(f"Verdicts withheld for {len(by.diagnostics_flags)} pair(s) with R-hat above the limit: "
                       + ", ".join(f"{a} vs {b}" for a, b in by.diagnostics_flags) + ".")
        out.append("")
        out += ["### Bayes family", ""] + _family_table(by.family.members, bundle, by.family.best) + [""]
        out += ["### Pairwise posteriors", "",
                "| x | y | P(x better) | P(ROPE) | P(y better) | verdict | max R-hat |",
                "|---|---|---:|---:|---:|---|---:|"]
        for s in by.theta_summaries:
            verdict = by.matrix.verdict(s["x"], s["y"])
            rhat = s["max_rhat"]
            out.append(f"| {s['x']} | {s['y']} | {s['theta'][0]:.4f} | {s['theta'][1]:.4f} | {s['theta'][2]:.4f} "
                       f"| {verdict} | {_fmt(rhat, 3)} |")
        out.append("")
    return "\n".join(out)


def emit_report(bundle: ReportBundle, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(bundle.to_dict(), indent=2, allow_nan=False) + "\n"
    if fmt in ("md", "markdown"):
        return _markdown(bundle)
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(text: str) -> ReportBundle:
    return ReportBundle.from_dict(json.loads(text))
