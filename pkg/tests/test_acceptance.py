"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the "acceptance criteria" section of the terminal summary.
"""

from __future__ import annotations

import json
import math
import time

import numpy as np
import pytest

from mtgl.cli import main as cli_main
from mtgl.connectivity import p_conn_bounds, p_conn_brute, p_conn_exact
from mtgl.cpp import jump_law, verify_representation
from mtgl.experiments import mc_fluctuations
from mtgl.graphsim import gw_batch, sample_graph
from mtgl.model import make_model, perron_root, solve_dual
from mtgl.rates import build_context, cgf_check, is_pd, k_context
from mtgl.trees import mass_identities, tau_enum, tau_log
from mtgl.typevec import compositions

from conftest import random_kernel

SEED = 20240601


def _elapsed(t0: float) -> float:
    return time.perf_counter() - t0


def test_criterion_01_matrix_tree_vs_prufer(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst, cases = 0.0, 0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        K = random_kernel(rng, d)
        for m in range(1, 8):
            for k in compositions(m, d):
                enum = tau_enum(k, K)
                worst = max(worst, abs(math.exp(tau_log(k, K)) / enum - 1))
                cases += 1
    dt = _elapsed(t0)
    ok = worst <= 1e-10 and dt < 30
    acceptance(1, ok, f"max rel err {worst:.2e} over {cases} cases (tol 1e-10), {dt:.1f}s (< 30s)")
    assert ok


def test_criterion_02_connection_probability_oracle(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 1)
    worst, cases, sandwich_ok = 0.0, 0, True
    for _ in range(200):
        d = int(rng.integers(1, 4))
        K = random_kernel(rng, d, 0.1, 5.0)
        n = int(rng.integers(6, 200))
        for m in range(1, 7):
            for k in compositions(m, d):
                ex = p_conn_exact(k, n, K).value
                br = p_conn_brute(k, n, K).value
                worst = max(worst, abs(ex - br))
                b = p_conn_bounds(k, n, K)
                sandwich_ok &= b.est_lower <= br * (1 + 1e-12) and br <= b.est_upper * (1 + 1e-12)
                cases += 1
    dt = _elapsed(t0)
    ok = worst <= 1e-12 and sandwich_ok and dt < 60
    acceptance(2, ok, f"max |exact-brute| {worst:.2e} (tol 1e-12), sandwich {'ok' if sandwich_ok else 'violated'}"
                      f" over {cases} cases, {dt:.1f}s (< 60s)")
    assert ok


REPRESENTATION_CASES = [
    ([[1.0]], [1.0], 3, None),
    ([[1.0]], [1.0], 3, 2 / 3),
    ([[2.0]], [1.0], 4, None),
    ([[2.0]], [1.0], 4, 0.5),
    ([[1.5, 2.0], [2.0, 1.0]], [2 / 3, 1 / 3], 3, None),
    ([[1.5, 2.0], [2.0, 1.0]], [2 / 3, 1 / 3], 3, [1 / 3, 1 / 3]),
    ([[1.5, 2.0], [2.0, 1.0]], [0.5, 0.5], 4, None),
    ([[1.5, 2.0], [2.0, 1.0]], [0.5, 0.5], 4, [0.25, 0.5]),
]


def test_criterion_03_representation_identity(acceptance):
    t0 = time.perf_counter()
    worst_tv, worst_gap = 0.0, 0.0
    for kappa, mu, n, alpha in REPRESENTATION_CASES:
        rep = verify_representation(make_model(kappa, mu, n), alpha, tol=1e-12)
        worst_tv = max(worst_tv, rep.tv)
        worst_gap = max(worst_gap, rep.terminal_rel_gap)
    dt = _elapsed(t0)
    ok = worst_tv <= 1e-12 and worst_gap <= 1e-12 and dt < 120
    acceptance(3, ok, f"max TV {worst_tv:.2e}, max terminal-route gap {worst_gap:.2e} (tol 1e-12)"
                      f" over {len(REPRESENTATION_CASES)} configurations, {dt:.1f}s (< 120s)")
    assert ok


def test_criterion_04_identity_suite(acceptance):
    t0 = time.perf_counter()
    fixtures = [([[0.5]], [1.0]), ([[2.0]], [1.0]), ([[1.0, 3.0], [3.0, 1.0]], [0.5, 0.5])]
    ok = True
    notes = []
    for kappa, mu in fixtures:
        kappa = np.asarray(kappa, dtype=float)
        c = solve_dual(kappa, mu).c
        mi = mass_identities(kappa, c, tol=1e-6)
        tgt = mi.targets(kappa, c)
        tail = mi.tail_estimate
        errs = (abs(mi.sum_h - tgt["sum_h"]), np.abs(mi.sum_kh - tgt["sum_kh"]).max(),
                np.abs(mi.phi_truncated - tgt["phi"]).max())
        ok &= tail <= 1e-6 and max(errs) <= tail
        notes.append(f"K={mi.truncation_radius} err {max(errs):.1e}<=tail {tail:.1e}")
    single = mass_identities([[0.5]], [1.0], tol=1e-6)
    ok &= abs(single.sum_h - 0.75) <= 1e-6 and abs(single.sum_kh[0] - 1) <= 1e-6
    ok &= abs(single.phi_truncated[0, 0] - 2) <= 1e-6
    dt = _elapsed(t0)
    ok &= dt < 10
    acceptance(4, ok, "; ".join(notes) + f"; {dt:.1f}s (< 10s)")
    assert ok


def test_criterion_05_convergence_trend(acceptance):
    t0 = time.perf_counter()
    c = solve_dual([[2.0]], [1.0]).c[0]
    q = c - c * c
    gaps, mean_gaps = [], []
    for n in (50, 100, 200, 400):
        law = jump_law(make_model([[2.0]], [1.0], n))
        gaps.append(abs(law.Z - q))
        mean_gaps.append(abs(law.mean()[0] - c / q))
    dt = _elapsed(t0)
    dec = all(a > b for a, b in zip(gaps, gaps[1:]))
    mdec = all(a > b for a, b in zip(mean_gaps, mean_gaps[1:]))
    ok = dec and mdec and gaps[-1] < 0.5 / math.sqrt(400) and dt < 60
    acceptance(5, ok, f"|Z_n-q| {', '.join(f'{g:.2e}' for g in gaps)}; mean gaps "
                      f"{', '.join(f'{g:.2e}' for g in mean_gaps)}; {dt:.1f}s (< 60s)")
    assert ok


def test_criterion_06_positive_definiteness(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 6)
    models = sufficient_cases = 0
    ok = True
    worst_rank_one = 0.0
    while models < 50:
        d = int(rng.integers(1, 4))
        kappa = random_kernel(rng, d, 0.3, 4.0)
        w = rng.uniform(0.2, 1.0, d)
        mu = w / w.sum()
        kappa = kappa * rng.uniform(1.2, 3.0) / perron_root(kappa, mu)
        ctx = build_context(kappa, mu, check=False)
        ok &= is_pd(ctx.giant_hessian()) and is_pd(ctx.A + ctx.B)
        worst_rank_one = max(worst_rank_one, ctx.rank_one_gap())
        for m in range(1, 5):
            for k in compositions(m, d):
                if sum(k) == 0:
                    continue
                kc = k_context(ctx, k)
                if kc.pd_condition:
                    sufficient_cases += 1
                    ok &= kc.apbk_pd
        models += 1
    dt = _elapsed(t0)
    ok &= worst_rank_one <= 1e-10 and dt < 10
    acceptance(6, ok, f"50 models, {sufficient_cases} k under the sufficient condition, "
                      f"rank-one gap {worst_rank_one:.1e} (tol 1e-10), {dt:.1f}s (< 10s)")
    assert ok


def _fluct_rows(report):
    return [f"{r.name} {r.ratio:.3f}" for r in report.rows]


@pytest.mark.slow
def test_criterion_07_monte_carlo_vs_hessians(acceptance):
    t0 = time.perf_counter()
    fixtures = [
        (make_model([[2.0]], [1.0], 2000), [(1,), (2,)]),
        (make_model([[1.0, 3.0], [3.0, 1.0]], [0.5, 0.5], 2000), [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]),
    ]
    ok = True
    notes = []
    for idx, (model, ks) in enumerate(fixtures):
        report, _ = mc_fluctuations(model, 10_000, SEED + 70 + idx, ks)
        # strict relative bands; the jackknife allowance is not used here
        ok &= all(r.within_band for r in report.rows)
        bad = [r.name for r in report.rows if not r.within_band]
        notes.append(f"d={model.d}: " + ", ".join(_fluct_rows(report)) + (f" [out: {bad}]" if bad else ""))
    for kappa, mu in ([[2.0]], [1.0]), ([[1.0, 3.0], [3.0, 1.0]], [0.5, 0.5]):
        c = solve_dual(kappa, mu).c
        target = 1 - c[0] / mu[0]
        gw = gw_batch(kappa, mu, 0, 10_000, SEED + 77, cap=10**5)
        within = abs(gw.explosion_rate - target) <= 3 * gw.explosion_se
        ok &= within
        notes.append(f"GW {gw.explosion_rate:.4f}+-{gw.explosion_se:.4f} vs {target:.4f}")
    dt = _elapsed(t0)
    ok &= dt < 600
    acceptance(7, ok, " | ".join(notes) + f" | {dt:.0f}s (< 600s)")
    assert ok


def test_criterion_08_gartner_ellis(acceptance):
    t0 = time.perf_counter()
    n = 10**5
    law = jump_law(make_model([[0.5]], [1.0], n))
    checks = [cgf_check(law.ks, law.probs, law.Z, n, 0.25, 0.3, variant=v) for v in ("poisson", "fixed")]
    dt = _elapsed(t0)
    ok = all(ch.passed for ch in checks) and dt < 30
    acceptance(8, ok, "; ".join(f"{ch.variant} gap {ch.gap:.2e} <= {ch.bound:.3f}" for ch in checks)
               + f"; {dt:.1f}s (< 30s)")
    assert ok


def test_criterion_09_sampler_performance(acceptance):
    n = 10**6
    model = make_model([[2.0]], [1.0], n)
    t0 = time.perf_counter()
    g = sample_graph(model, SEED)
    dt = _elapsed(t0)
    ratio = g.draws / g.num_edges
    ok = dt < 5 and ratio < 1.5
    acceptance(9, ok, f"n=1e6: {g.num_edges} edges from {g.draws} geometric skips "
                      f"(ratio {ratio:.2f}, n^2/2 = 5e11) in {dt:.2f}s (< 5s)")
    assert ok


def _run_cli(argv, capsys):
    code = cli_main(argv)
    out, _ = capsys.readouterr()
    assert code == 0
    return out


def test_criterion_10_determinism(acceptance, tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("MTGL_SEED", raising=False)
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    cfg = tmp_path / "model.cfg"
    cfg.write_text("types = [a, b]\nkappa = [[1, 3], [3, 1]]\nmu = [0.5, 0.5]\nn = 500\n")
    outputs = {}
    for tag, workers in (("first", 1), ("second", 1), ("four", 4)):
        sim = tmp_path / f"sim-{tag}"
        mc = tmp_path / f"mc-{tag}"
        _run_cli(["sim", "run", "--model", str(cfg), "--replicates", "200", "--seed", "42",
                  "--track-k", "1,0;1,1", "--workers", str(workers), "--out", str(sim)], capsys)
        _run_cli(["mc", "fluctuations", "--model", str(cfg), "--replicates", "1000", "--seed", "42",
                  "--track-k", "1,0", "--workers", str(workers), "--out", str(mc)], capsys)
        outputs[tag] = tuple((d / f).read_bytes() for d, f in
                             ((sim, "replicates.csv"), (sim, "summary.json"),
                              (mc, "replicates.csv"), (mc, "fluctuations.json")))
    manifest = json.loads(outputs["first"][1])["manifest"]
    same_runs = outputs["first"] == outputs["second"]
    same_workers = outputs["first"] == outputs["four"]
    ok = same_runs and same_workers
    acceptance(10, ok, f"consecutive runs identical: {same_runs}; 1 vs 4 workers identical: {same_workers}"
                       f" (seed {manifest['master_seed']}, {manifest['prng']})")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
