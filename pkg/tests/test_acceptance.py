"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time
import warnings
from itertools import permutations

import numpy as np
import pytest

from bmcluster import (
    PRESETS,
    BmcModel,
    CountMatrix,
    Partition,
    check_zero_condition,
    expected_count_matrix,
    find_balanced_perturbation,
    improve,
    information_pair,
    information_quantity,
    misclassification,
    perturbation_functional,
    simulate_counts,
    solve_stationary_block,
    spectral_cluster,
)
from bmcluster.exceptions import TrimClampWarning, ZeroRowWarning
from bmcluster.harness import ExperimentConfig, exp_spectral_norm, run_pipeline, trial_seed
from bmcluster.info import two_cluster_p


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}")
        assert ok, detail

    return emit


def test_criterion_1_information_values(verdict):
    start = time.perf_counter()
    spectral = information_quantity(PRESETS["spectral"].alpha, PRESETS["spectral"].p).I
    improvement = information_quantity(PRESETS["improvement"].alpha, PRESETS["improvement"].p).I
    elapsed = time.perf_counter() - start
    ok = abs(spectral - 0.88) <= 0.01 and abs(improvement - 0.27) <= 0.01 and elapsed < 1.0
    verdict(1, "information values", ok, f"I={spectral:.5f} (0.88+-0.01), I={improvement:.5f} (0.27+-0.01), {elapsed * 1e3:.1f} ms")


def test_criterion_2_zero_line(verdict):
    on_line, off_line = [], []
    for a2 in np.linspace(0.05, 0.90, 20):
        alpha = [1 - a2, a2]
        p = two_cluster_p(a2, 1 - a2)
        I = information_quantity(alpha, p).I
        on_line.append(I < 1e-9 and check_zero_condition(alpha, p)[0])
        # shift p12 off the line by 0.05
        off_line.append(information_quantity(alpha, two_cluster_p(a2 + 0.05, 1 - a2)).I)
    ok = all(on_line) and min(off_line) > 1e-3
    verdict(2, "zero line", ok, f"{sum(on_line)}/20 on-line points with I<1e-9 and zero condition; min perturbed I={min(off_line):.4g} (>1e-3)")


def test_criterion_3_end_to_end_demo(verdict):
    model = PRESETS["demo"]
    start = time.perf_counter()
    finals = [run_pipeline(model, 300, 1973, seed, 3).error_rates[-1] for seed in range(20)]
    elapsed = time.perf_counter() - start
    median, best = float(np.median(finals)), min(finals)
    ok = median <= 0.02 and best <= 1 / 300 and elapsed < 120
    verdict(3, "n=300 T=1973 end to end", ok, f"median final error={median:.4f} (<=0.02), best={best:.4f} (<=1/300), {elapsed:.1f} s")


def test_criterion_4_regime_contrast(verdict):
    model = PRESETS["spectral"]
    n = 300
    start = time.perf_counter()
    means = []
    for T in (math.floor(n * math.log(n)), math.floor(n * math.log(n) ** 2)):
        errs = [run_pipeline(model, n, T, trial_seed(0, i), 0).error_rates[0] for i in range(20)]
        means.append(float(np.mean(errs)))
    elapsed = time.perf_counter() - start
    ok = 0.30 <= means[0] <= 0.60 and means[1] <= 0.05 and elapsed < 300
    verdict(4, "spectral regime contrast", ok, f"T=n ln n mean={means[0]:.4f} in [0.30,0.60]; T=n ln^2 n mean={means[1]:.4f} (<=0.05), {elapsed:.1f} s")


def test_criterion_5_improvement(verdict):
    model = PRESETS["improvement"]
    n = 240
    start = time.perf_counter()
    long_runs = [run_pipeline(model, n, 30000, trial_seed(0, i), 2) for i in range(50)]
    exact = sum(r.rates_through(2)[2] == 0 for r in long_runs)
    short_runs = [run_pipeline(model, n, 2500, trial_seed(0, i), 2).rates_through(2) for i in range(50)]
    spectral_mean = float(np.mean([r[0] for r in short_runs]))
    improved_mean = float(np.mean([r[2] for r in short_runs]))
    elapsed = time.perf_counter() - start
    ok = exact >= 45 and improved_mean <= spectral_mean + 0.02 and elapsed < 600
    verdict(
        5,
        "improvement stage",
        ok,
        f"T=30000: {exact}/50 exact after 2 steps (>=45); T=2500: improved {improved_mean:.4f} vs spectral {spectral_mean:.4f} (+0.02), {elapsed:.1f} s",
    )


def test_criterion_6_noise_norm_scaling(verdict):
    cfg = ExperimentConfig(model=PRESETS["spectral"], n_grid=list(range(100, 501, 50)), t_rule="nlog1.5n", trials=10)
    start = time.perf_counter()
    _, fit = exp_spectral_norm(cfg)
    elapsed = time.perf_counter() - start
    ok = fit.r2 >= 0.95 and elapsed < 600
    verdict(6, "noise norm ~ c1 + c2 sqrt(T/n)", ok, f"R^2={fit.r2:.4f} (>=0.95), c1={fit.intercept:.3f}, c2={fit.slope:.3f}, {elapsed:.1f} s")


# --- criterion 7: property suites ---------------------------------------


def _power_iteration(p):
    M = 0.5 * (p + np.eye(p.shape[0]))
    for _ in range(80):
        M = M @ M
        M /= M.sum(axis=1, keepdims=True)
        if np.abs(M - M[0]).max() < 1e-15:
            break
    return M.mean(axis=0)


def _random_model(rng, K):
    p = rng.uniform(0.05, 1, size=(K, K))
    p /= p.sum(axis=1, keepdims=True)
    a = rng.uniform(0.2, 1, size=K)
    return BmcModel(a / a.sum(), p)


def _stationary_oracle(rng):
    return max(np.abs(solve_stationary_block(m.p) - _power_iteration(m.p)).max() for m in (_random_model(rng, int(rng.integers(2, 6))) for _ in range(100))) < 1e-10


def _row_stochastic(rng):
    worst = 0.0
    for _ in range(50):
        m = _random_model(rng, int(rng.integers(1, 5)))
        P = m.kernel(int(rng.integers(20, 80))).P
        worst = max(worst, np.abs(P.sum(axis=1) - 1).max())
    return worst < 1e-12


def _flow_conservation(rng):
    for seed in range(30):
        m = _random_model(rng, int(rng.integers(1, 5)))
        cm = simulate_counts(m.kernel(40), int(rng.integers(1, 5000)), seed)
        if np.abs(cm.out_visits - cm.in_visits).max() > 1:
            return False
    return True


def _brute(t, e, K):
    return min(sum(dict((j, k) for k, j in enumerate(perm))[x] != y for x, y in zip(e, t)) for perm in permutations(range(K)))


def _misclassification_oracle(rng):
    for _ in range(200):
        K = int(rng.integers(1, 5))
        n = int(rng.integers(1, 13))
        t, e = rng.integers(0, K, n), rng.integers(0, K, n)
        r = misclassification(Partition(t, K, allow_empty=True), Partition(e, K, allow_empty=True))
        renamed = rng.permutation(K)[e]
        if r.mismatches != _brute(t, e, K) or r.mismatches != misclassification(t, renamed).mismatches:
            return False
    return True


def _objective_dominance(rng):
    ok = True

    def audit(i, current, step):
        nonlocal ok
        picked = step.scores[np.arange(step.scores.shape[0]), step.partition.labels]
        ok &= bool(np.all(picked >= step.scores.max(axis=1)))

    for trial in range(20):
        model = PRESETS[("demo", "spectral", "improvement")[trial % 3]]
        kernel = model.kernel(120)
        counts = simulate_counts(kernel, int(rng.integers(500, 20000)), trial)
        start = Partition(np.concatenate([[0, 1, 2], rng.integers(0, 3, 117)]), 3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ZeroRowWarning)
            improve(counts, start, 6, callback=audit)
    return ok


def _balanced_sandwich(rng):
    models = [PRESETS[k] for k in PRESETS] + [_random_model(rng, 3) for _ in range(10)]
    for m in models:
        for a in range(m.K):
            for b in range(m.K):
                if a == b:
                    continue
                res = find_balanced_perturbation(m.alpha, m.p, a, b)
                Ia = perturbation_functional(res.q, m.alpha, m.p, a)
                Ib = perturbation_functional(res.q, m.alpha, m.p, b)
                if abs(Ia - Ib) >= 1e-9 or not (-1e-12 <= Ia <= information_pair(m.alpha, m.p, a, b) + 1e-12):
                    return False
    return True


def _noiseless_recovery(rng):
    for name, model in PRESETS.items():
        kernel = model.kernel(150)
        N = CountMatrix(expected_count_matrix(kernel, math.floor(150 * math.log(150))))
        if misclassification(kernel.partition, spectral_cluster(N, model.K).clusters).mismatches:
            return False
    return True


def test_criterion_7_property_suites(verdict):
    checks = {
        "stationary oracle": _stationary_oracle,
        "row stochastic": _row_stochastic,
        "flow conservation": _flow_conservation,
        "misclassification oracle": _misclassification_oracle,
        "objective dominance": _objective_dominance,
        "balanced sandwich": _balanced_sandwich,
        "noiseless recovery": _noiseless_recovery,
    }
    results = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TrimClampWarning)
        for i, (name, check) in enumerate(checks.items()):
            results[name] = check(np.random.default_rng(1000 + i))
    failed = [k for k, v in results.items() if not v]
    verdict(7, "property suites", not failed, f"{len(results) - len(failed)}/{len(results)} suites hold" + (f"; failed: {', '.join(failed)}" if failed else ""))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
