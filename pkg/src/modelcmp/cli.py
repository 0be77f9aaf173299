"""Command-line front end.

Exit codes: 0 success, 2 usage/config/data error, 3 I/O error. All output
files go inside ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
import threading
from dataclasses import replace

from . import __version__
from .bayes.evaluate import BayesConfig, posterior_triples
from .config import FORMATS, ConfigError, RunConfig, load_config
from .perfdata import DataError, PerfTable, parse_results_csv
from .plotting import cd_diagram, simplex_plot, windowpane
from .report import (
    ReportBundle,
    bayes_section,
    build_report,
    emit_report,
    friedman_section,
    naive_section,
    Provenance,
    sha256_bytes,
)
from .simulate import GenSpec, coverage_experiment, null_experiment

log = logging.getLogger("modelcmp")

EXIT_OK, EXIT_DATA, EXIT_IO = 0, 2, 3


class IOFailure(Exception):
    pass


# ---------------------------------------------------------------- argument parsing


def _common(p: argparse.ArgumentParser, data: bool = True):
    p.add_argument("--config", help="key = value config file; flags override it")
    if data:
        p.add_argument("--input", help="long-format CSV of fold results")
        p.add_argument("--columns", help="value,resample,dataset,model column names (dataset may be a+b)")
        p.add_argument("--metric", help="metric name used in labels (default AUC)")
        p.add_argument("--lower-is-better", dest="higher_is_better", action="store_const", const=False,
                       default=None, help="treat smaller metric values as better")
    p.add_argument("--out", help="output directory (default ./out)")
    p.add_argument("--format", dest="formats", help=f"comma list from {','.join(FORMATS)}")
    p.add_argument("--seed", type=int, help="master seed (default: $MODELCMP_SEED or 0)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _bayes_flags(p: argparse.ArgumentParser):
    p.add_argument("--rope", type=float, help="ROPE half-width (default 0.01)")
    p.add_argument("--threshold", type=float, help="posterior decision threshold (default 0.95)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rho", type=float, help="fold correlation n_test/n_train")
    g.add_argument("--cv-train-frac", type=float, help="training share of each fold; rho = (1-f)/f")
    p.add_argument("--chains", type=int, help="MCMC chains (default 4)")
    p.add_argument("--draws", type=int, help="retained draws over all chains (default 50000)")
    p.add_argument("--burn-in", type=int, help="burn-in iterations per chain (default 2500)")
    p.add_argument("--jobs", type=int, help="parallel pair comparisons (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modelcmp", description="Compare many models across datasets.")
    parser.add_argument("--version", action="version", version=f"modelcmp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the results grid is complete and well formed")
    _common(p)

    p = sub.add_parser("naive", help="best model by average metric")
    _common(p)

    p = sub.add_parser("friedman", help="Friedman test, Nemenyi critical difference, CD diagram")
    _common(p)
    p.add_argument("--alpha", type=float, help="significance level (default 0.05)")
    p.add_argument("--force-posthoc", action="store_const", const=True, default=None,
                   help="run the post-hoc family even if the omnibus test retains")

    p = sub.add_parser("bayes", help="hierarchical Bayesian pairwise comparisons")
    _common(p)
    _bayes_flags(p)
    p.add_argument("--simplex", action="store_const", const=True, default=None,
                   help="also draw one posterior simplex plot per pair")

    p = sub.add_parser("report", help="all three methods in one report")
    _common(p)
    _bayes_flags(p)
    p.add_argument("--alpha", type=float, help="significance level (default 0.05)")
    p.add_argument("--force-posthoc", action="store_const", const=True, default=None)
    p.add_argument("--no-bayes", action="store_true", help="frequentist-only report")

    p = sub.add_parser("simulate", help="calibration experiments on synthetic data")
    sim = p.add_subparsers(dest="experiment", required=True)
    q = sim.add_parser("null", help="Type-I calibration of Friedman and naive selection")
    _common(q, data=False)
    q.add_argument("--runs", type=int, default=1000)
    q.add_argument("--datasets", type=int, default=20)
    q.add_argument("--models", type=int, default=5)
    q.add_argument("--folds", type=int, default=10)
    q.add_argument("--alpha", type=float, default=0.05)
    q = sim.add_parser("coverage", help="credible-interval coverage of the hierarchical model")
    _common(q, data=False)
    _bayes_flags(q)
    q.add_argument("--runs", type=int, default=200)
    q.add_argument("--datasets", type=int, default=20)
    q.add_argument("--folds", type=int, default=10)
    q.add_argument("--mu0", type=float, default=0.0)
    q.add_argument("--sigma0", type=float, default=0.01)
    q.add_argument("--nu", type=float, default=5.0)
    q.add_argument("--sigma-scale", type=float, default=0.02)
    q.add_argument("--level", type=float, default=0.9)
    return parser


_OVERRIDES = ("input", "columns", "metric", "higher_is_better", "alpha", "rope", "threshold", "rho",
              "cv_train_frac", "chains", "draws", "burn_in", "seed", "out", "formats", "jobs",
              "force_posthoc", "simplex")


def config_from_args(args) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
    try:
        return load_config(args.config, **overrides)
    except OSError as exc:
        raise IOFailure(f"cannot read config {args.config}: {exc.strerror or exc}") from None


# ---------------------------------------------------------------- I/O helpers


class OutputDir:
    """Writes confined to one directory; names are sanitized to single path components."""

    def __init__(self, path: str):
        self.root = os.path.abspath(path)
        self.written: list[str] = []

    def write(self, name: str, text: str) -> str:
        parts = [re.sub(r"[^A-Za-z0-9._-]+", "_", p).lstrip(".") or "_" for p in name.split("/")]
        target = os.path.join(self.root, *parts)
        if os.path.commonpath([self.root, os.path.abspath(target)]) != self.root:
            raise IOFailure(f"refusing to write outside {self.root}: {name}")
        try:
            os.makedirs(os.path.dirname(target), exist_ok=True)
            with open(target, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise IOFailure(f"cannot write {target}: {exc.strerror or exc}") from None
        self.written.append(target)
        return target


def read_input(cfg: RunConfig) -> tuple[PerfTable, str]:
    if not cfg.input:
        raise ConfigError("no input given (use --input or 'input =' in the config)")
    try:
        with open(cfg.input, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read {cfg.input}: {exc.strerror or exc}") from None
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise DataError(f"{cfg.input} is not UTF-8 text: {exc}") from None
    table = parse_results_csv(text, cfg.column_map, cfg.metric, cfg.higher_is_better)
    return table, sha256_bytes(raw)


def _progress(total: int):
    lock = threading.Lock()
    done = [0]

    def hook(post):
        with lock:
            done[0] += 1
            log.info("pair %d/%d %s vs %s theta=(%.3f, %.3f, %.3f)", done[0], total, post.model_x, post.model_y,
                     *post.theta)

    return hook


def _bundle_json(bundle: ReportBundle, keys) -> str:
    d = bundle.to_dict()
    return json.dumps({k: d[k] for k in keys}, indent=2, allow_nan=False) + "\n"


def _order_by_performance(bundle: ReportBundle) -> list[str]:
    means = bundle.naive.means
    sign = -1.0 if bundle.higher_is_better else 1.0
    return sorted(bundle.models, key=lambda m: (sign * means[m], m))


def _family_line(label: str, fam, status: str | None = None) -> str:
    if fam is None:
        return f"{label}: undefined" + (f" ({status})" if status else "")
    return f"{label} ({len(fam.members)}): {', '.join(fam.members)}"


# ---------------------------------------------------------------- commands


def cmd_validate(args) -> int:
    cfg = config_from_args(args)
    table, digest = read_input(cfg)
    print(f"ok: {table.n_datasets} datasets x {table.n_models} models x {table.n_folds} folds "
          f"({table.metric_name}, sha256 {digest[:12]})")
    return EXIT_OK


def _light_bundle(cfg: RunConfig, table: PerfTable, digest: str) -> ReportBundle:
    naive = naive_section(table)
    fr = friedman_section(table, cfg.alpha, cfg.force_posthoc)
    return ReportBundle(Provenance(digest, cfg.seed, cfg.result_dict()), table.models, table.metric_name,
                        table.higher_is_better, naive, fr)


def cmd_naive(args) -> int:
    cfg = config_from_args(args)
    table, digest = read_input(cfg)
    bundle = _light_bundle(cfg, table, digest)
    out = OutputDir(cfg.out)
    if "json" in cfg.formats:
        out.write("naive.json", _bundle_json(bundle, ("meta", "naive")))
    if "md" in cfg.formats:
        lines = ["| Algorithm | Avg. " + table.metric_name + " |", "|---|---:|"]
        lines += [f"| {m} | {bundle.naive.means[m]:.4f} |" for m in _order_by_performance(bundle)]
        out.write("naive.md", "\n".join(lines) + "\n")
    if bundle.naive.family is None:
        print(f"error: naive average is tied for best between {', '.join(bundle.naive.tie)}", file=sys.stderr)
        return EXIT_DATA
    print(_family_line("naive family", bundle.naive.family))
    return EXIT_OK


def cmd_friedman(args) -> int:
    cfg = config_from_args(args)
    table, digest = read_input(cfg)
    bundle = _light_bundle(cfg, table, digest)
    fr = bundle.friedman
    out = OutputDir(cfg.out)
    if "json" in cfg.formats:
        out.write("friedman.json", _bundle_json(bundle, ("meta", "friedman")))
    if "md" in cfg.formats:
        out.write("friedman.md", emit_report(bundle, "md"))
    if "svg" in cfg.formats and fr.nemenyi is not None:
        ranks = [fr.avg_ranks[m] for m in table.models]
        out.write("cd_diagram.svg", cd_diagram(ranks, fr.nemenyi.cd, table.models))
    o = fr.outcome
    print(f"Friedman statistic {o.statistic:.6g}, dof {o.dof}, p = {o.p_value:.6g}")
    if fr.nemenyi is not None:
        print(f"q_alpha = {fr.nemenyi.q_alpha:.6g}, CD = {fr.nemenyi.cd:.6g}")
    print(_family_line("NHST family", fr.family, fr.family_status))
    return EXIT_OK


def _simplex_hook(out: OutputDir, cfg: RunConfig, base_hook):
    counter = {}

    def hook(post):
        base_hook(post)
        if post.chains is not None:
            pts = posterior_triples(post.chains, cfg.rope)
            svg = simplex_plot(pts, (post.model_x, post.model_y), cfg.rope, title=f"{post.model_x} vs {post.model_y}")
            counter[(post.model_x, post.model_y)] = svg
            post.chains = None  # keep memory bounded by the number of workers

    return hook, counter


def _write_simplex(out: OutputDir, table: PerfTable, svgs: dict):
    for n, (x, y) in enumerate((a, b) for i, a in enumerate(table.models) for b in table.models[i + 1:]):
        if (x, y) in svgs:
            out.write(f"simplex/{n + 1:04d}_{x}__{y}.svg", svgs[(x, y)])


def cmd_bayes(args) -> int:
    cfg = config_from_args(args)
    table, digest = read_input(cfg)
    out = OutputDir(cfg.out)
    base = _light_bundle(cfg, table, digest)
    total = table.n_models * (table.n_models - 1) // 2
    hook = _progress(total)
    svgs = {}
    if cfg.simplex:
        hook, svgs = _simplex_hook(out, cfg, hook)
    section, _ = bayes_section(table, cfg.bayes_config(), cfg.seed, base.naive, base.friedman, cfg.jobs, hook,
                               keep_chains=cfg.simplex)
    bundle = replace(base, bayes=section)
    if "json" in cfg.formats:
        out.write("bayes.json", _bundle_json(bundle, ("meta", "bayes")))
    if "md" in cfg.formats:
        out.write("bayes.md", emit_report(bundle, "md"))
    if "svg" in cfg.formats:
        out.write("windowpane.svg", windowpane(section.matrix, _order_by_performance(bundle)))
        _write_simplex(out, table, svgs)
    if section.diagnostics_flags:
        print(f"warning: {len(section.diagnostics_flags)} pair(s) flagged for R-hat; verdicts withheld",
              file=sys.stderr)
    print(f"decided {100 * section.matrix.decided_fraction():.2f}% of {total} pairs")
    print(_family_line("Bayes family", section.family))
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = config_from_args(args)
    table, digest = read_input(cfg)
    out = OutputDir(cfg.out)
    bayes_cfg = None if args.no_bayes else cfg.bayes_config()
    total = table.n_models * (table.n_models - 1) // 2
    meta_cfg = cfg.result_dict()
    meta_cfg["bayes"] = not args.no_bayes
    bundle, _ = build_report(table, digest, cfg.seed, meta_cfg, cfg.alpha, cfg.force_posthoc, bayes_cfg,
                             cfg.jobs, _progress(total))
    if "json" in cfg.formats:
        out.write("report.json", emit_report(bundle, "json"))
    if "md" in cfg.formats:
        out.write("report.md", emit_report(bundle, "md"))
    if "svg" in cfg.formats:
        fr = bundle.friedman
        if fr.nemenyi is not None:
            out.write("cd_diagram.svg", cd_diagram([fr.avg_ranks[m] for m in table.models], fr.nemenyi.cd,
                                                   table.models))
        if bundle.bayes is not None:
            out.write("windowpane.svg", windowpane(bundle.bayes.matrix, _order_by_performance(bundle)))
    print(_family_line("naive family", bundle.naive.family, "tie: " + ", ".join(bundle.naive.tie or ())))
    print(_family_line("NHST family", bundle.friedman.family, bundle.friedman.family_status))
    if bundle.bayes is not None:
        print(_family_line("Bayes family", bundle.bayes.family))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = config_from_args(args)
    if args.runs < 1:
        raise ConfigError("runs must be positive")
    out = OutputDir(cfg.out)
    if args.experiment == "null":
        try:
            summary = null_experiment(args.runs, args.datasets, args.models, args.folds, args.alpha, cfg.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        name = "simulate_null.json"
    else:
        try:
            spec = GenSpec(args.datasets, args.folds, args.mu0, args.sigma0, args.nu, args.sigma_scale,
                           cfg.effective_rho(), cfg.seed)
            bcfg: BayesConfig = cfg.bayes_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        summary = coverage_experiment(spec, args.runs, cfg.seed, bcfg, args.level, cfg.jobs)
        name = "simulate_coverage.json"
    text = json.dumps(summary, indent=2, allow_nan=False) + "\n"
    out.write(name, text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "naive": cmd_naive,
    "friedman": cmd_friedman,
    "bayes": cmd_bayes,
    "report": cmd_report,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IOFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
