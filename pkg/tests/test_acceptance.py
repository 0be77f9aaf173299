"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``. The PASS/FAIL lines are
printed even under output capture. Criteria that take minutes are marked
``slow``.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy import stats

from conftest import ranked_values
from test_frequentist import FRIEDMAN_FIXTURES, chi2_tail_quadrature, grid_quantile, ranks_of
from modelcmp.bayes.evaluate import (
    BayesConfig,
    bayes_decision_matrix,
    bayes_family,
    compare_pair,
    verdict_from_theta,
)
from modelcmp.bayes.model import cs_gaussian_logpdf
from modelcmp.cli import main
from modelcmp.decisions import ROPE, DecisionMatrix
from modelcmp.frequentist import (
    chi_square_upper_tail,
    friedman_statistic,
    nemenyi,
    nhst_family,
    studentized_range_quantile,
)
from modelcmp.perfdata import table_from_arrays, write_results_csv
from modelcmp.ranking import RankMatrix, TieError, naive_best, table_ranks
from modelcmp.simulate import GenSpec, coverage_experiment, null_experiment


@pytest.fixture
def verdict(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
        assert ok, detail
    return emit


def test_c01_critical_difference(verdict):
    t0 = time.perf_counter()
    out = nemenyi(RankMatrix.from_avg_ranks(np.arange(1.0, 97.0), 48), alpha=0.05)
    elapsed = time.perf_counter() - t0
    target = 22.5936
    rel = abs(out.cd - target) / target
    verdict("1", rel <= 0.005 and elapsed < 1.0,
            f"CD(k=96, N=48) = {out.cd:.4f} (q = {out.q_alpha:.4f}) vs {target}, rel err {rel:.2%}, {elapsed:.2f}s")


def test_c02_quantiles(verdict):
    q = {k: studentized_range_quantile(k, 0.05) for k in range(2, 11)}
    ok2 = abs(q[2] - 1.95996) <= 0.001
    errs = {k: abs(q[k] - grid_quantile(k)) for k in range(3, 11)}
    mono = all(q[k + 1] > q[k] for k in range(2, 10))
    verdict("2", ok2 and max(errs.values()) <= 0.002 and mono,
            f"q(2) = {q[2]:.5f}, max |q - oracle| for k=3..10 = {max(errs.values()):.2e}, monotone = {mono}")


def test_c03_friedman(verdict):
    bad = []
    for rows, stat, dof, p in FRIEDMAN_FIXTURES:
        out = friedman_statistic(ranks_of(rows))
        if abs(out.statistic - stat) > 1e-12 or out.dof != dof or abs(out.p_value - p) > 1e-9 * max(p, 1e-6):
            bad.append(rows)
    flat = friedman_statistic(table_ranks(table_from_arrays(np.full((5, 4, 3), 0.7))))
    sep = friedman_statistic(ranks_of([[1, 2]] * 7))
    tail_err = max(abs(chi_square_upper_tail(x, d) - chi2_tail_quadrature(x, d))
                   for x in (0.0, 0.5, 3.84, 10.0, 25.0, 60.0) for d in (1, 2, 3, 5, 9, 30))
    ok = not bad and flat.statistic == 0.0 and sep.statistic == 7.0 and tail_err < 1e-8
    verdict("3", ok, f"{len(FRIEDMAN_FIXTURES) + 2} fixtures, {len(bad)} mismatches, "
                     f"all-tied = {flat.statistic}, k=2 separation N=7 -> {sep.statistic}, tail err {tail_err:.1e}")


@pytest.mark.slow
def test_c04_type_one_calibration(verdict):
    t0 = time.perf_counter()
    out = null_experiment(runs=1000, n_datasets=20, n_models=5, n_folds=10, alpha=0.05, seed=2024)
    elapsed = time.perf_counter() - t0
    rej, uniq = out["friedman_rejection_rate"], out["naive_unique_best_rate"]
    verdict("4", 0.03 <= rej <= 0.07 and uniq > 0.99 and elapsed < 300,
            f"rejection rate {rej:.3f}, naive unique best {uniq:.3f}, {elapsed:.1f}s")


def test_c05_compound_symmetry(verdict):
    g = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        r = int(g.integers(2, 21))
        s2 = float(np.exp(g.uniform(-6, 2)))
        rho = float(g.uniform(0.0, 0.95))
        mu = float(g.normal())
        cov = s2 * ((1 - rho) * np.eye(r) + rho * np.ones((r, r)))
        x = g.multivariate_normal(np.full(r, mu), cov)
        ref = stats.multivariate_normal(np.full(r, mu), cov).logpdf(x)
        worst = max(worst, abs(cs_gaussian_logpdf(x, mu, s2, rho) - ref) / max(1.0, abs(ref)))
    verdict("5", worst <= 1e-10, f"max error vs dense oracle over 1000 draws {worst:.1e}")


@pytest.mark.slow
def test_c06_sampler_validity(verdict):
    t0 = time.perf_counter()
    out = coverage_experiment(GenSpec(n_datasets=20, n_folds=10, mu_0=0.02), runs=200, seed=6, level=0.9)
    elapsed = time.perf_counter() - t0
    cov, rhat = out["coverage"], out["rhat_ok_fraction"]
    ok = out["failures"] == 0 and 0.83 <= cov <= 0.97 and rhat >= 0.95 and elapsed < 1800
    verdict("6", ok, f"90% interval coverage {cov:.3f}, R-hat <= 1.05 in {rhat:.1%} of runs "
                     f"(max {out['max_rhat']:.3f}), {out['failures']} failures, {elapsed:.0f}s")


@pytest.mark.slow
def test_c07_rope_behaviour(verdict):
    table = table_from_arrays(np.full((20, 2, 10), 0.8))
    post = compare_pair(table, "m1", "m2", BayesConfig(rope=0.01), seed=7)
    out = coverage_experiment(GenSpec(mu_0=0.05), runs=100, seed=0)
    ok = post.p_rope >= 0.95 and out["decided_fraction"] >= 0.90
    verdict("7", ok, f"all-zero p_rope = {post.p_rope:.3f}; mu_0 = 0.05 decided in "
                     f"{out['decided_fraction']:.0%} of 100 runs")


def _big_table(k, n, r, seed):
    g = np.random.default_rng(seed)
    base = g.uniform(0.6, 0.9, (n, 1, 1))
    skill = np.linspace(0.03, 0.0, k)[None, :, None]
    return table_from_arrays(base + skill + 0.02 * g.standard_normal((n, k, r)))


@pytest.mark.slow
def test_c08a_single_pair_throughput(verdict):
    table = _big_table(2, 48, 10, 8)
    compare_pair(table, "m1", "m2", seed=0)  # JIT warm-up
    t0 = time.perf_counter()
    post = compare_pair(table, "m1", "m2", seed=1)
    elapsed = time.perf_counter() - t0
    verdict("8a", elapsed <= 10.0, f"N=48, r=10, 50000 draws in {elapsed:.2f}s (max R-hat {post.diagnostics.max_rhat:.3f})")


class Deadline(Exception):
    pass


@pytest.mark.slow
def test_c08b_full_grid_throughput(verdict):
    import os

    table = _big_table(96, 48, 10, 9)
    total = 96 * 95 // 2
    budget = 600.0
    done = [0]
    t0 = time.perf_counter()

    def hook(_post):
        done[0] += 1
        if time.perf_counter() - t0 > budget:
            raise Deadline

    try:
        bayes_decision_matrix(table, seed=0, jobs=None, progress=hook)
        finished = True
    except Deadline:
        finished = False
    elapsed = time.perf_counter() - t0
    if finished:
        detail = f"{total} pairs in {elapsed:.0f}s on {os.cpu_count()} core(s)"
    else:
        rate = elapsed / max(done[0], 1)
        detail = (f"aborted at {budget:.0f}s after {done[0]}/{total} pairs on {os.cpu_count()} core(s); "
                  f"{rate:.2f}s per pair extrapolates to {rate * total:.0f}s")
    verdict("8b", finished and elapsed <= budget, detail)


@pytest.mark.slow
def test_c09_report_determinism(verdict, tmp_path, capsys):
    g = np.random.default_rng(10)
    v = 0.75 + 0.02 * g.standard_normal((8, 4, 10))
    v[:, 0] += 0.03
    csv = tmp_path / "in.csv"
    csv.write_text(write_results_csv(table_from_arrays(v)))
    runs = {}
    for tag, jobs in (("a", 1), ("b", 1), ("c", 2)):
        code = main(["report", "--input", str(csv), "--out", str(tmp_path / tag), "--seed", "11", "--jobs", str(jobs)])
        assert code == 0
        runs[tag] = {p.name: p.read_bytes() for p in sorted((tmp_path / tag).iterdir()) if p.is_file()}
    capsys.readouterr()
    names = sorted(runs["a"])
    same = runs["a"] == runs["b"] == runs["c"]
    verdict("9", same and {"report.json", "cd_diagram.svg", "windowpane.svg"} <= set(names),
            f"{len(names)} files ({', '.join(names)}) byte-identical across reruns and --jobs 1/2: {same}")


def test_c10_family_rules(verdict):
    g = np.random.default_rng(12)
    failures = []
    models = tuple(f"m{j + 1}" for j in range(8))
    for trial in range(200):
        # NHST: random average ranks; predicted family = within CD of the top rank
        avg = g.permutation(np.linspace(1.0, 8.0, 8) + g.uniform(-0.3, 0.3, 8))
        ranks = RankMatrix.from_avg_ranks(avg, int(g.integers(4, 60)))
        out = nemenyi(ranks)
        top = int(np.argmin(avg))
        expect = {models[j] for j in range(8) if avg[j] - avg[top] < out.cd}
        fam = nhst_family(ranks, out, models, force=True) if not friedman_statistic(ranks).rejects(0.05) \
            else nhst_family(ranks, out, models)
        if set(fam.members) != expect or fam.best != models[top]:
            failures.append(("nhst", trial))
        # Bayes: engineered theta grid; predicted family = top mean plus rope-to-top at 0.95
        means = g.permutation(np.linspace(0.9, 0.7, 8))
        best = int(np.argmax(means))
        dm = DecisionMatrix.empty(models, 0.95)
        expect = {models[best]}
        for i, j in itertools.combinations(range(8), 2):
            p_rope = float(g.choice([0.2, 0.949, 0.95, 0.951, 0.99]))
            theta = ((1 - p_rope) / 2, p_rope, (1 - p_rope) / 2)
            dm.set(i, j, verdict_from_theta(theta, 0.95))
            if best in (i, j) and p_rope > 0.95:
                expect.add(models[j if i == best else i])
        fam = bayes_family(dm, means)
        if set(fam.members) != expect or fam.best != models[best]:
            failures.append(("bayes", trial))
        # naive: singleton or a reported tie
        vals = np.round(g.uniform(0, 1, (5, 8, 3)), 1)
        if trial % 4 == 0:
            vals[:, 1] = vals[:, 0]
        try:
            if len(naive_best(table_from_arrays(vals)).members) != 1:
                failures.append(("naive", trial))
        except TieError as exc:
            if len(exc.tied) < 2:
                failures.append(("naive-tie", trial))
    verdict("10", not failures, f"600 engineered fixtures, {len(failures)} rule violations")
