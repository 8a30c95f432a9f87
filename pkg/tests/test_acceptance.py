"""Acceptance criteria, each at its stated tolerance.

Every test appends one ``PASS``/``FAIL`` line to ``RESULTS``; the lines are
printed at the end of a pytest run and when this file is executed directly
(``python3 tests/test_acceptance.py``).
"""

import csv
import json
import math
import time

import numpy as np
import pytest

from seqtune.cli import main as cli_main
from seqtune.data import load_fixture
from seqtune.dist_fit import dist_study, fit_mle, summarize_study
from seqtune.param_space import sample_configs
from seqtune.learners import LearnerKind
from seqtune.resampling import EvalCache, make_bootstrap_instance
from seqtune.seqtest import Decision, run_slrt, setting
from seqtune.tuner import paired_compare, random_search

RESULTS: list[str] = []

# fixtures used for the quantitative paired-harness check (two per task kind)
PAIRED_FIXTURES = {
    "regression": ("concrete_small", "diamonds_small"),
    "classification": ("pima_small", "cancer_small"),
}
PAIRED_LEARNER = "elastic_net"
PAIRED_REPLICATIONS = 100


def record(number: int, title: str, ok: bool, detail: str) -> None:
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}")


# 1 --------------------------------------------------------------------------

SIGMA_U, SIGMA_W = 0.03, 0.05  # spread of logged losses seen on the classification fixtures


def test_01_slrt_calibration():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240101)
    R, n_max = 2000, 500
    lines, ok = [], True
    for label in "ABCD":
        cfg = setting(label, n_max)
        errs, forced = {}, 0
        for name, delta in (("I", cfg.gamma0), ("II", cfg.gamma1)):
            wrong = 0
            for _ in range(R):
                u = rng.normal(delta, SIGMA_U, n_max)
                w = rng.normal(0.0, SIGMA_W, n_max)
                dec, _ = run_slrt(u, w, cfg)
                forced += dec.forced
                # type I: accepting H1 under H0; type II: not accepting H1 under H1
                wrong += dec.candidate_wins if name == "I" else not dec.candidate_wins
            errs[name] = wrong / R
        lim1 = cfg.alpha + 2 * math.sqrt(cfg.alpha * (1 - cfg.alpha) / R)
        lim2 = cfg.beta + 2 * math.sqrt(cfg.beta * (1 - cfg.beta) / R)
        good = errs["I"] <= lim1 and errs["II"] <= lim2
        ok &= good
        lines.append(f"{label}: I={errs['I']:.3f}/{lim1:.3f} II={errs['II']:.3f}/{lim2:.3f} "
                     f"forced={forced / (2 * R):.3f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    record(1, "SLRT calibration", ok, "; ".join(lines) + f"; {elapsed:.1f}s")
    assert ok, lines


# 2 --------------------------------------------------------------------------

def test_02_cvm_calibration_bands():
    t0 = time.perf_counter()
    counts = {"normal": 0, "uniform": 0, "exponential": 0}
    ranges = {k: [math.inf, -math.inf] for k in counts}
    for seed in range(100):
        rng = np.random.default_rng(seed)
        for kind, draw, inside in (
            ("normal", lambda: rng.normal(size=1000), lambda t: t < 0.5),
            ("uniform", lambda: rng.uniform(size=1000), lambda t: 0.5 <= t <= 3.0),
            ("exponential", lambda: rng.exponential(size=1000), lambda t: t > 4.0),
        ):
            t = fit_mle(draw(), "normal").cvm
            counts[kind] += inside(t)
            ranges[kind][0] = min(ranges[kind][0], t)
            ranges[kind][1] = max(ranges[kind][1], t)
    elapsed = time.perf_counter() - t0
    ok = counts["normal"] >= 95 and counts["uniform"] == 100 and counts["exponential"] == 100
    ok &= elapsed < 120
    detail = ", ".join(f"{k} {counts[k]}/100 in band (T {ranges[k][0]:.3g}..{ranges[k][1]:.3g})"
                       for k in counts)
    record(2, "CvM calibration bands", ok, f"{detail}; {elapsed:.1f}s")
    assert ok


# 3 --------------------------------------------------------------------------

def test_03_distribution_ranking():
    t0 = time.perf_counter()
    rows = dist_study(load_fixture("boston_small"), "elastic_net", n_configs=10, n_boot=200, seed=0)
    med = {fam: m for fam, m, _ in summarize_study(rows)}
    good = ("lognormal", "gamma", "invgamma", "loggamma")
    ok = all(med[w] > med[g] for w in ("weibull", "invweibull") for g in good)
    ok &= med["normal"] > med["lognormal"]
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    detail = ", ".join(f"{f}={m:.3g}" for f, m in sorted(med.items(), key=lambda kv: kv[1]))
    record(3, "distribution-study ranking", ok, f"median CvM {detail}; {elapsed:.1f}s")
    assert ok


# 4 and 5 --------------------------------------------------------------------

@pytest.fixture(scope="module")
def paired_runs():
    t0 = time.perf_counter()
    runs = {}
    for task, names in PAIRED_FIXTURES.items():
        for name in names:
            runs[name] = paired_compare(None, PAIRED_LEARNER, load_fixture(name), K=10, n_configs=50,
                                        replications=PAIRED_REPLICATIONS, seed=2024)
    return runs, time.perf_counter() - t0


def test_04_paired_structural_invariants(paired_runs):
    runs, _ = paired_runs
    n = bad = 0
    for res in runs.values():
        for r in res.reports:
            n += 1
            good = (r.perf_ratio >= 1.0 and 0.0 < r.eval_ratio <= 1.0 and r.sqrs_fits <= 500
                    and r.identical == (r.rs_winner == r.sqrs_winner))
            bad += not good
    ok = bad == 0 and n == PAIRED_REPLICATIONS * 4 * len(runs)
    record(4, "paired-harness invariants", ok, f"{n} reports checked, {bad} violations")
    assert ok


def test_05_paired_quantitative(paired_runs):
    runs, elapsed = paired_runs
    ok, parts = True, []
    for name, res in runs.items():
        by = {s.setting: s for s in res.summary}
        ident = [by[s].prop_identical for s in "ABCD"]
        ev_a, ev_d = by["A"].median_eval_ratio, by["D"].median_eval_ratio
        good = (ident[3] >= 0.70 and all(a <= b for a, b in zip(ident, ident[1:]))
                and ev_a <= 0.65 and ev_d <= 0.85)
        ok &= good
        parts.append(f"{name}: identical {'/'.join(f'{v:.2f}' for v in ident)}, "
                     f"median eval A={ev_a:.3f} D={ev_d:.3f}")
    ok &= elapsed < 1800
    record(5, "paired-harness reproduction", ok, "; ".join(parts) + f"; {elapsed:.0f}s")
    assert ok


# 6 --------------------------------------------------------------------------

def test_06_random_search_oracle(tmp_path):
    rng = np.random.default_rng(6)
    names = ("boston_small", "pima_small", "diamonds_small", "cancer_small", "concrete_small")
    agree = 0
    for i in range(20):
        ds = load_fixture(names[i % len(names)])
        kind = LearnerKind.ELASTIC_NET if i % 2 == 0 else LearnerKind.CART_TREE
        K = int(rng.integers(2, 6))
        inst = make_bootstrap_instance(ds.n, K, int(rng.integers(2**31)))
        configs = sample_configs(kind.default_space, rng, int(rng.integers(2, 8)))
        cache = EvalCache()
        res = random_search(kind.default_space, kind, ds, inst, cache=cache, configs=configs)
        path = tmp_path / f"cache{i}.csv"
        cache.to_csv(path)
        table: dict[int, list[float]] = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                table.setdefault(int(row["config_id"]), []).append(float(row["loss"]))
        assert all(len(v) == K for v in table.values())
        oracle = min(sorted(table), key=lambda cid: sum(table[cid]) / K)
        agree += oracle == res.best.id
    ok = agree == 20
    record(6, "random-search oracle", ok, f"{agree}/20 instances agree")
    assert ok


# 7 --------------------------------------------------------------------------

def test_07_closed_form_mle():
    x = np.array([0.5, 1.25, 2.0, 3.5, 7.0])
    worst = 0.0
    for shift in (0.0, 0.25):
        y = x + shift
        mu, var = sum(y) / 5, sum((v - sum(y) / 5) ** 2 for v in y) / 5
        r = fit_mle(x, "normal", shift)
        worst = max(worst, abs(r.params[0] - mu), abs(r.params[1] ** 2 - var))
        ly = [math.log(v) for v in y]
        lmu = sum(ly) / 5
        lvar = sum((v - lmu) ** 2 for v in ly) / 5
        r = fit_mle(x, "lognormal", shift)
        worst = max(worst, abs(r.params[0] - lmu), abs(r.params[1] ** 2 - lvar))
    ok = worst <= 1e-12
    record(7, "closed-form MLE", ok, f"max abs deviation {worst:.2e}")
    assert ok


# 8 --------------------------------------------------------------------------

def test_08_out_of_bag_fraction():
    n = 300
    inst = make_bootstrap_instance(n, 1000, seed=8)
    mean = float(np.mean([p.test_fraction for p in inst]))
    oob = (1 - 1 / n) ** n
    ok = abs(mean - oob) <= 0.03
    record(8, "bootstrap out-of-bag fraction", ok,
           f"mean test fraction {mean:.4f} vs never-drawn probability (1-1/n)^n = {oob:.4f} "
           f"(in-bag complement 1-(1-1/n)^n = {1 - oob:.4f})")
    assert ok


# 9 --------------------------------------------------------------------------

def test_09_compare_deterministic(tmp_path):
    cfg = {"task": {"fixture": "pima_small"}, "learner": "cart_tree", "seed": 9,
           "tuner": {"K": 10, "n_configs": 10, "replications": 5}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    blobs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert cli_main(["compare", "--config", str(path), "--out", str(out)]) == 0
        blobs.append({f.name: f.read_bytes() for f in sorted(out.glob("*.csv"))})
    ok = blobs[0] == blobs[1] and set(blobs[0]) == {"paired_reports.csv", "aggregate.csv"}
    record(9, "compare determinism", ok, f"{len(blobs[0])} CSVs byte-identical: {blobs[0] == blobs[1]}")
    assert ok


if __name__ == "__main__":
    import sys

    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    print("\n".join(RESULTS))
    sys.exit(code)
