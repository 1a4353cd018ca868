"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Published values are compared at the tolerances the criteria state. Cells
that do not reproduce are reported in full, not skipped.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from rdbcd import golden, reproduction
from rdbcd.cli import main
from rdbcd.criteria import (CriterionId, StratumCounts, criterion_closed_form,
                            criterion_from_matrix, information_matrix)
from rdbcd.design import DesignSpace
from rdbcd.engine import asymptotic_information, convergence_diagnostics, run_study
from rdbcd.randomization import atkinson_da, baz1, baz2, dbcd, erade, zhang_cara
from rdbcd.targets import constant_weight_target


def _describe(failed, limit=12):
    parts = [f"{c.coordinate} {c.quantity} reference={c.expected:g} got={c.got:.5f}"
             for c in failed[:limit]]
    more = f" (+{len(failed) - limit} more)" if len(failed) > limit else ""
    return "; ".join(parts) + more


def test_criterion_1_target_tables(acceptance):
    start = time.perf_counter()
    checks = reproduction.target_checks()
    elapsed = time.perf_counter() - start
    failed = [c for c in checks if not c.passed]
    ok = not failed and len(checks) == 192 and elapsed < 5.0
    detail = f"{len(checks) - len(failed)}/{len(checks)} cells within 5e-4 in {elapsed:.2f}s"
    if failed:
        detail += "; off: " + _describe(failed)
    assert acceptance(1, "target reproduction", ok, detail), detail


def test_criterion_2_constrained_table(acceptance):
    checks = reproduction.constrained_checks()
    failed = [c for c in checks if not c.passed]
    detail = f"{len(checks) - len(failed)}/{len(checks)} values within tolerance"
    if failed:
        detail += "; off: " + _describe(failed)
    assert acceptance(2, "constrained reproduction", not failed, detail), detail


def _random_counts(rng, space):
    N = rng.integers(2, 15, space.n_strata)
    return StratumCounts(N, np.array([rng.integers(1, n) for n in N]))


def test_criterion_3_oracle_equivalence(acceptance):
    rng = np.random.default_rng(2024)
    worst, configs, c45 = 0.0, 0, True
    for i in range(120):
        space = DesignSpace(1 + i % 2, 1 + (i // 2) % 2)
        counts = _random_counts(rng, space)
        sigma2 = rng.uniform(0.3, 3.0)
        M = information_matrix(space, counts)
        for crit in CriterionId:
            dense = criterion_from_matrix(crit, M, counts.n, sigma2)
            closed = criterion_closed_form(crit, space, counts, sigma2)
            worst = max(worst, abs(closed - dense) / abs(dense))
        c45 &= (criterion_closed_form("C4", space, counts, sigma2)
                == criterion_closed_form("C5", space, counts, sigma2))
        configs += 1
    ok = worst <= 1e-9 and c45 and configs >= 100
    detail = f"{configs} configs, max relative gap {worst:.2e}, C4 == C5 exactly: {c45}"
    assert acceptance(3, "closed form vs dense oracle", ok, detail), detail


def _bump_p(p, k, factor):
    q = p.copy()
    q[k] = min(p[k] * factor, (1 + p[k]) / 2)
    rest = np.arange(p.size) != k
    q[rest] *= (1 - q[k]) / p[rest].sum()
    return q / q.sum()


def test_criterion_4_target_law(acceptance):
    rng = np.random.default_rng(61)
    problems, scenarios, worst_sym = [], 0, 0.0
    for crit in CriterionId:
        for i in range(60):
            space = DesignSpace(1 + i % 2, 1 + (i // 3) % 2)
            K = space.n_strata
            theta = rng.uniform(-5, 5, K)
            theta = np.where(np.abs(theta) < 0.05, 0.05, theta)
            p = rng.dirichlet(np.full(K, 2.0))
            p = np.maximum(p, 0.02)
            p /= p.sum()
            omega = rng.uniform(0.05, 0.95)
            pi = constant_weight_target(crit, space, theta, p, omega)
            if not np.all(np.sign(pi - 0.5) == np.sign(theta)):
                problems.append(f"{crit.value} side-of-half #{i}")
            sym = np.max(np.abs(pi - (1 - constant_weight_target(crit, space, -theta, p, omega))))
            worst_sym = max(worst_sym, sym)
            k = int(rng.integers(K))
            bumped = theta.copy()
            bumped[k] += rng.uniform(0.05, 2.0)
            if constant_weight_target(crit, space, bumped, p, omega)[k] < pi[k] - 1e-12:
                problems.append(f"{crit.value} theta-monotone #{i}")
            moved = constant_weight_target(crit, space, theta, _bump_p(p, k, 1.3), omega)[k]
            if (theta[k] > 0 and moved < pi[k] - 1e-12) or (theta[k] < 0 and moved > pi[k] + 1e-12):
                problems.append(f"{crit.value} p-monotone #{i}")
            scenarios += 1
    ok = not problems and worst_sym <= 1e-8
    detail = (f"{scenarios} scenarios over C1-C5, worst symmetry gap {worst_sym:.1e}, "
              f"violations {problems[:5]}")
    assert acceptance(4, "target-law properties", ok, detail), detail


def test_criterion_5_phi_axioms(acceptance):
    x = np.linspace(0.0, 1.0, 81)
    y = x[1:-1]
    z = np.array([1e-4, 0.01, 0.05, 0.1, 0.25, 0.5, 0.9])
    X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
    rules = {"zhang_cara": zhang_cara(), "baz1": baz1(1.0), "baz2": baz2(2 / 3, 4),
             "erade": erade(2 / 3), "dbcd": dbcd(2.0)}
    problems = []
    for name, rule in rules.items():
        phi = rule(X, Y, Z)
        if np.any(np.diff(phi, axis=0) > 1e-12) or np.any(np.diff(phi, axis=1) < -1e-12):
            problems.append(f"{name} (i)")
        if np.max(np.abs(rule(y, y, np.full_like(y, 0.3)) - y)) > 0:
            problems.append(f"{name} (ii)")
        dz = np.diff(phi, axis=2)
        if np.any(dz[(X < Y)[:, :, :-1]] > 1e-12) or np.any(dz[(X > Y)[:, :, :-1]] < -1e-12):
            problems.append(f"{name} (iii)")
        if np.max(np.abs(phi - (1 - rule(1 - X, 1 - Y, Z)))) > 1e-12:
            problems.append(f"{name} (iv)")
    # the D_A rule on its balanced slice y = 1/2
    da = atkinson_da()(x, np.full_like(x, 0.5), np.full_like(x, 0.3))
    if np.any(np.diff(da) > 0) or atkinson_da()(0.5, 0.5, 0.3) != 0.5:
        problems.append("atkinson_da")
    spots = [
        (erade(2 / 3)(0.8, 0.6, 0.2), 0.4),
        (erade(2 / 3)(0.4, 0.6, 0.2), 1 - 2 / 3 * 0.4),
        (baz1(1.0)(0.5, 0.75, 0.5), 0.75 * 1.25 ** 2 / (0.75 * 1.25 ** 2 + 0.25 * 0.75 ** 2)),
        (baz2(2 / 3, 4)(0.3, 0.6, 0.25), 1.0 / (1.0 + 0.4 / 3 / (0.6 * 5 / 3))),
        (atkinson_da()(0.5, 0.7, 0.2), 0.5),
    ]
    for got, want in spots:
        if abs(got - want) > 1e-12:
            problems.append(f"spot {got} != {want}")
    detail = f"{len(rules)} rules on a {X.size}-point grid; problems: {problems or 'none'}"
    assert acceptance(5, "phi axioms", not problems, detail), detail


def _simulation(acceptance, replicates, mean_tol, label, number=6):
    start = time.perf_counter()
    checks, reports = reproduction.simulation_checks(replicates, seed=0, mean_tol=mean_tol)
    order = reproduction.sd_ordering_checks(reports)
    failed = [c for c in checks + order if not c.passed]
    detail = (f"{label}: h={replicates}, {len(checks) + len(order) - len(failed)}/"
              f"{len(checks) + len(order)} checks in {time.perf_counter() - start:.0f}s")
    if failed:
        detail += "; off: " + _describe(failed)
    return acceptance(number, f"simulation reproduction ({label})", not failed, detail), detail


def test_criterion_6_simulation_fast(acceptance):
    ok, detail = _simulation(acceptance, 100, golden.SIM_MEAN_TOL_FAST, "fast")
    assert ok, detail


def test_criterion_6_simulation_full(acceptance):
    ok, detail = _simulation(acceptance, golden.SIM_H, golden.SIM_MEAN_TOL, "full")
    assert ok, detail


def test_criterion_7_asymptotics(acceptance):
    rng = np.random.default_rng(77)
    worst, pd = 0.0, True
    for i in range(50):
        space = DesignSpace(1 + i % 3, 1 + (i // 3) % 2)
        K = space.n_strata
        pi = rng.uniform(0.05, 0.95, K)
        p = rng.dirichlet(np.ones(K))
        p = np.maximum(p, 1e-3)
        p /= p.sum()
        M, _ = asymptotic_information(space, pi, p)
        oracle = np.zeros_like(M)
        for k, f in enumerate(space.regressor_matrix()):
            zero = np.zeros_like(f)
            a = np.concatenate([[1.0, 0.0], f, zero])
            b = np.concatenate([[0.0, 1.0], zero, f])
            oracle += p[k] * (pi[k] * np.outer(a, a) + (1 - pi[k]) * np.outer(b, b))
        worst = max(worst, float(np.max(np.abs(M - oracle))))
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            pd = False
    row = next(r for r in golden.SIMULATIONS if r.table == 6 and r.rule == "baz2")
    cfg = replace(reproduction.simulation_config(row, replicates=100, seed=3), n=4000,
                  checkpoints=(250, 1000, 4000))
    summary = convergence_diagnostics(run_study(cfg).results, cfg.true_target())
    ok = worst <= 1e-12 and pd and summary.decreasing
    med = ", ".join(f"n={n}: {e:.4f}" for n, e in zip(summary.checkpoints,
                                                    summary.median_proportion_error))
    detail = (f"oracle gap {worst:.1e} over 50 draws, all positive definite: {pd}; "
              f"median max|pi_n - pi*| {med}")
    assert acceptance(7, "asymptotics", ok, detail), detail


def test_criterion_8_determinism(acceptance, tmp_path):
    config = tmp_path / "sim.yaml"
    config.write_text(
        "schema_version: 1\ndesign: {J: 1, L: 1}\n"
        "params: {alpha: -4.0, tau: [-1.0, 3.0, 3.0]}\n"
        "distribution: [0.2, 0.3, 0.4, 0.1]\ncriterion: C1\n"
        "weight: {kind: chi_square_cdf, parameter: 1}\n"
        "rule: {kind: erade, rho: 0.6666666666666666}\n"
        "simulation: {n: 200, m: 4, replicates: 12, seed: 314}\n")
    runs = {"serial-a": ["--workers", "1"], "serial-b": ["--workers", "1"],
            "parallel-3": ["--workers", "3"], "parallel-4": ["--workers", "4"]}
    blobs = {}
    for name, extra in runs.items():
        out = tmp_path / name
        assert main(["simulate", "--config", str(config), "--out", str(out), *extra]) == 0
        blobs[name] = b"".join((out / f).read_bytes() for f in sorted(
            p.name for p in out.iterdir()))
    ok = len(set(blobs.values())) == 1
    detail = f"{len(runs)} runs (1, 1, 3 and 4 workers) byte-identical: {ok}"
    assert acceptance(8, "determinism", ok, detail), detail
