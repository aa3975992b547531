"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from mobsim.experiments import (
    ScenarioConfig,
    data_source_experiment,
    gen_random_tableau,
    random_scaling_experiment,
    slice_match_search,
    spatial_exchange_experiment,
    summarize,
    uniform_scaling_experiment,
)
from mobsim.metrics import compare, estimate_mu, nmd
from mobsim.solver import min_cost, solve_km, solve_oracle
from mobsim.tableau import (
    Dihedral,
    FlowVector,
    GridSpec,
    MobilityTableau,
    dihedral_transform,
    embed,
    extract_slice,
    reduce_common,
    total_mass_cost,
)

from conftest import random_tableau

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def test_1_oracle_equivalence(report):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst, n = 0.0, 520
    for it in range(n):
        g = GridSpec(int(rng.integers(1, 7)), int(rng.integers(1, 7)))
        fractional = bool(it % 2)
        X = random_tableau(rng, g, int(rng.integers(0, 13)), fractional=fractional)
        Y = random_tableau(rng, g, int(rng.integers(0, 13)), fractional=fractional)
        worst = max(worst, abs(solve_km(X, Y).total_cost - solve_oracle(X, Y).total_cost))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-9 and elapsed < 60,
           f"{n} instances, max |km - oracle| = {worst:.2e} (<= 1e-9), {elapsed:.1f}s (< 60s)")


def test_2_metric_axioms(report):
    rng = np.random.default_rng(2)
    violations, n = [], 240
    for it in range(n):
        g = GridSpec(int(rng.integers(2, 7)), int(rng.integers(2, 7)))
        X, Y, Z = (random_tableau(rng, g, int(rng.integers(0, 10)), fractional=bool(it % 2)) for _ in range(3))
        xy = min_cost(X, Y)
        k = float(rng.uniform(0.1, 10))
        checks = {
            "symmetry": abs(xy - min_cost(Y, X)),
            "triangle": xy - min_cost(X, Z) - min_cost(Z, Y),
            "reducibility": abs(xy - min_cost(*reduce_common(X, Y))),
            "homogeneity": abs(min_cost(X.scaled(k), Y.scaled(k)) - k * xy) / max(1.0, k * xy),
        }
        if total_mass_cost(X) + total_mass_cost(Y) > 0:
            v = nmd(X, Y)
            checks["nmd_range"] = max(-v, v - 1)
        violations += [name for name, excess in checks.items() if excess > 1e-9]
    report(2, not violations, f"{n} triples, violations beyond 1e-9: {len(violations)} {sorted(set(violations))}")


def test_3_uniform_scaling_closed_forms(report):
    cfg = ScenarioConfig("uniform_scaling", grid=GridSpec(20, 20), n_vectors=2000, seed=3)
    X = gen_random_tableau(cfg.grid, cfg.n_vectors, cfg.seed)
    a = total_mass_cost(X)
    err_md = err_nmd = err_rr = 0.0
    for r in uniform_scaling_experiment(cfg, X):
        phi = r.params["phi"]
        err_md = max(err_md, abs(r.metrics["md"] - abs(1 - phi) * a * cfg.grid.cell_width))
        err_nmd = max(err_nmd, abs(r.metrics["nmd"] - (1 - abs(1 - phi) / (1 + phi))))
        err_rr = max(err_rr, abs(r.metrics["rrnsa"] - 1))
    ok = max(err_md, err_nmd, err_rr) <= 1e-9
    report(3, ok, f"20 phis on 20x20, max errors md {err_md:.1e}, nmd {err_nmd:.1e}, rrnsa {err_rr:.1e} (<= 1e-9)")


def test_4_random_scaling_trends(report):
    cfg = ScenarioConfig("random_scaling", grid=GridSpec(10, 10), n_vectors=400, trials=100, seed=4)
    summary = summarize(random_scaling_experiment(cfg), "rrnsa")
    mean = {(s["phi"], s["omega"]): s["mean"] for s in summary}
    var = max(s["var"] for s in summary)
    phis, omegas = cfg.phi_values(), cfg.omegas
    dec_omega = all(mean[p, omegas[i]] > mean[p, omegas[i + 1]] for p in phis for i in range(len(omegas) - 1))
    inc_phi = all(mean[phis[i], w] < mean[phis[i + 1], w] for w in omegas for i in range(len(phis) - 1))
    report(4, dec_omega and inc_phi and var < 1e-3,
           f"decreasing in omega: {dec_omega}, increasing in phi: {inc_phi}, max variance {var:.2e} (< 1e-3)")


def test_5_spatial_exchange_trend(report):
    cfg = ScenarioConfig("spatial_exchange", grid=GridSpec(20, 20), n_vectors=2000, trials=100, seed=5)
    summary = summarize(spatial_exchange_experiment(cfg), "sp")
    ks = [s["k"] for s in summary]
    means = [s["mean"] for s in summary]
    rho = spearmanr(ks, means).statistic
    report(5, rho >= 0.8, f"Spearman(k, mean SP) = {rho:.3f} (>= 0.8), means {np.round(means, 4).tolist()}")


def test_6_data_source_trend(report):
    cfg = ScenarioConfig("data_source", grid=GridSpec(10, 10), n_individuals=100, trips_per_individual=5,
                         trials=100, seed=6)
    summary = summarize(data_source_experiment(cfg), "nma")
    ks = [s["k"] for s in summary]
    means = [s["mean"] for s in summary]
    rho = spearmanr(ks, means).statistic
    report(6, rho <= -0.8, f"Spearman(k, mean NMA) = {rho:.3f} (<= -0.8), k = 0..{max(ks)}")


def test_7_mu_stability(report):
    X = gen_random_tableau(GridSpec(10, 10), 400, 7)
    a = estimate_mu(X, trials=100, seed=1)
    b = estimate_mu(X, trials=100, seed=2)
    gap = abs(a.mean_nsa - b.mean_nsa)
    ok = a.std_nsa < 0.05 and b.std_nsa < 0.05 and gap <= 0.02
    report(7, ok, f"means {a.mean_nsa:.4f} / {b.mean_nsa:.4f} (gap {gap:.4f} <= 0.02), "
                  f"std {a.std_nsa:.4f} / {b.std_nsa:.4f} (< 0.05)")


def test_8_slice_match_recovery(report):
    size, window = 5, (7, 3)
    source = gen_random_tableau(GridSpec(10, 10), 1200, 80)
    anchor = (4, 5)
    piece = extract_slice(source, anchor, size)
    outcomes = []
    for k, g in enumerate(Dihedral):
        # background traffic plus the transformed slice planted at `window`
        target = gen_random_tableau(GridSpec(15, 15), 1500, 81 + k)
        target = target.with_flows({v: w for v, w in target.flows.items()
                                    if not (window[0] <= min(v.ox, v.dx) and max(v.ox, v.dx) < window[0] + size
                                            and window[1] <= min(v.oy, v.dy) and max(v.oy, v.dy) < window[1] + size)})
        planted = embed(dihedral_transform(piece, g), target.grid, (window[0] - 1, window[1] - 1))
        target = target.with_flows({**target.flows, **planted.flows})
        result = slice_match_search(source, target, size, anchor)
        best = result.best
        unique = sum(s.rrnsa == 1.0 for s in result.scores) == 1
        outcomes.append(best is not None and tuple(best.window) == window and best.element == g.inverse()
                        and best.rrnsa == 1.0 and unique)
    report(8, all(outcomes), f"planted window and inverse element recovered uniquely for {sum(outcomes)}/8 elements")


def test_9_worked_examples(report):
    g = GridSpec(3, 3)
    a = MobilityTableau(g, {FlowVector(1, 2, 2, 1): 1})
    b = MobilityTableau(g, {FlowVector(2, 3, 3, 2): 1})
    ac = MobilityTableau(g, {FlowVector(1, 2, 2, 1): 1, FlowVector(3, 1, 3, 3): 1})
    costs = (min_cost(a, ac), min_cost(a, b), min_cost(ac, a))
    report(9, costs == (2, 4, 2), f"add, shift, delete costs = {costs} (expected (2, 4, 2))")


def test_10_performance(report):
    rng = np.random.default_rng(10)
    g = GridSpec(20, 20)
    coords = rng.choice(g.n_cells ** 2, size=1000, replace=False)
    vecs = [FlowVector(int(c // 400 // 20) + 1, int(c // 400 % 20) + 1, int(c % 400 // 20) + 1, int(c % 20) + 1)
            for c in coords]
    X = MobilityTableau(g, {v: float(rng.integers(1, 5)) for v in vecs[:500]})
    Y = MobilityTableau(g, {v: float(rng.integers(1, 5)) for v in vecs[500:]})
    Xr, Yr = reduce_common(X, Y)
    t0 = time.perf_counter()
    r = compare(X, Y)
    elapsed = time.perf_counter() - t0
    ok = len(Xr) == len(Yr) == 500 and elapsed < 60 and r.nmd is not None
    report(10, ok, f"{len(Xr)}x{len(Yr)} types after reduction, compare took {elapsed:.2f}s (< 60s)")
