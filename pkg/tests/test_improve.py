import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmcluster import (
    BmcModel,
    CountMatrix,
    Partition,
    Trajectory,
    count_matrix,
    estimate_parameters,
    improve,
    improvement_step,
    misclassification,
    objective,
    simulate_counts,
    spectral_cluster,
)
from bmcluster.exceptions import EmptyCluster, ZeroRowWarning
from bmcluster.improve import ClusterEstimates, default_iterations, objective_matrix


def straight_line_objective(N, labels, est, x, c):
    """Score of state ``x`` in cluster ``c`` written out term by term."""
    n = N.shape[0]
    K = est.p_hat.shape[0]
    T = N.sum()
    total = 0.0
    for k in range(K):
        out_k = sum(N[x, y] for y in range(n) if labels[y] == k)
        in_k = sum(N[y, x] for y in range(n) if labels[y] == k)
        total += out_k * np.log(est.p_hat[c, k])
        total += in_k * np.log(est.p_hat[k, c] / est.alpha_hat[c])
    return total - (T / n) * est.pi_hat[c] / est.alpha_hat[c]


# --- estimates -----------------------------------------------------------


def test_estimates_on_alternating_singletons():
    traj = Trajectory(np.array([0, 1] * 50 + [0]))
    cm = count_matrix(traj, 2)
    assert cm.T == 100
    est = estimate_parameters(cm, Partition([0, 1]))
    d = est.floor
    assert d == 1 / 200
    # the floored zero is renormalised together with its row
    expected = np.array([[d, 1.0], [1.0, d]]) / (1 + d)
    assert np.allclose(est.p_hat, expected, atol=1e-15)
    assert np.allclose(est.pi_hat, [0.5, 0.5])
    assert np.array_equal(est.alpha_hat, [0.5, 0.5])


def test_estimates_converge_on_true_partition(demo):
    kernel = demo.kernel(300)
    rel = []
    for seed in range(20):
        est = estimate_parameters(simulate_counts(kernel, 10**5, seed), kernel.partition)
        assert np.abs(est.p_hat - demo.p).max() < 0.02
        assert np.allclose(est.p_hat.sum(axis=1), 1, atol=1e-9)
        assert est.pi_hat.sum() <= 1 + 1e-9
        rel.append(np.abs(est.p_hat - demo.p) / demo.p)
        rel.append(np.abs(est.pi_hat - demo.pi)[None, :] / demo.pi)
    p_rel = np.median(np.array(rel[0::2]), axis=0)
    pi_rel = np.median(np.array(rel[1::2]), axis=0)
    assert p_rel.max() < 0.05 and pi_rel.max() < 0.05


def test_alpha_hat_is_cluster_fraction():
    cm = CountMatrix(np.ones((5, 5), dtype=int) - np.eye(5, dtype=int))
    est = estimate_parameters(cm, Partition([0, 1, 1, 2, 2]))
    assert est.alpha_hat.tolist() == [0.2, 0.4, 0.4]


def test_zero_row_warns_and_uses_uniform():
    N = np.zeros((4, 4), dtype=int)
    N[0, 1] = N[1, 0] = 5  # cluster 1 = {2, 3} is never left
    with pytest.warns(ZeroRowWarning):
        est = estimate_parameters(CountMatrix(N), Partition([0, 0, 1, 1]))
    assert np.allclose(est.p_hat[1], 0.5)


def test_empty_cluster_rejected():
    cm = CountMatrix(np.ones((3, 3), dtype=int))
    with pytest.raises(EmptyCluster):
        estimate_parameters(cm, Partition([0, 0, 0], 2, allow_empty=True))


# --- objective -----------------------------------------------------------


def test_objective_hand_instance():
    traj = Trajectory(np.array([0, 1, 0, 2, 3, 2, 0, 1]))
    cm = count_matrix(traj, 4)
    part = Partition([0, 0, 1, 1])
    est = estimate_parameters(cm, part)
    U = objective_matrix(cm, part, est)
    for x in range(4):
        for c in range(2):
            ref = straight_line_objective(cm.counts, part.labels, est, x, c)
            assert U[x, c] == pytest.approx(ref, abs=1e-12)
            assert objective(cm, part, est, x, c) == U[x, c]


def test_objective_of_unvisited_state():
    N = np.zeros((5, 5), dtype=int)
    N[0, 1] = 3
    N[1, 2] = 2
    N[2, 0] = 4
    N[1, 3] = 1
    N[3, 0] = 1
    cm = CountMatrix(N)
    part = Partition([0, 0, 1, 1, 1])
    est = estimate_parameters(cm, part)
    U = objective_matrix(cm, part, est)
    expected = -(cm.T / 5) * est.pi_hat / est.alpha_hat
    assert np.allclose(U[4], expected, atol=1e-14)
    step = improvement_step(cm, part)
    assert step.partition.labels[4] == int(np.argmin(est.pi_hat / est.alpha_hat))


def test_objective_ties_go_to_first_cluster():
    est = ClusterEstimates(np.full((3, 3), 1 / 3), np.full(3, 1 / 3), np.full(3, 1 / 3), 0.0)
    cm = CountMatrix(np.ones((6, 6), dtype=int))
    part = Partition([0, 0, 1, 1, 2, 2])
    U = objective_matrix(cm, part, est)
    assert np.all(U == U[:, :1])
    assert np.all(np.argmax(U, axis=1) == 0)


# --- improvement step ----------------------------------------------------


def test_true_partition_is_fixed_point(demo):
    kernel = demo.kernel(300)
    counts = simulate_counts(kernel, 10**5, 1)
    step = improvement_step(counts, kernel.partition)
    assert step.partition == kernel.partition


def test_single_cluster_identity():
    cm = CountMatrix(np.ones((4, 4), dtype=int))
    part = Partition([0, 0, 0, 0])
    assert improvement_step(cm, part).partition == part


def test_one_step_reduces_spectral_error(improvement_model):
    kernel = improvement_model.kernel(240)
    reduced = 0
    for seed in range(20):
        counts = simulate_counts(kernel, 30000, seed)
        start = spectral_cluster(counts, 3).clusters
        before = misclassification(kernel.partition, start).mismatches
        after = misclassification(kernel.partition, improvement_step(counts, start).partition).mismatches
        reduced += after < before
    assert reduced >= 18


def test_step_is_pure(spectral_model):
    kernel = spectral_model.kernel(90)
    counts = simulate_counts(kernel, 2000, 3)
    start = Partition(np.random.default_rng(0).integers(0, 3, 90), 3)
    a = improvement_step(counts, start)
    b = improvement_step(counts, start)
    assert np.array_equal(a.partition.labels, b.partition.labels)
    assert np.array_equal(a.scores, b.scores)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), perm=st.permutations(range(3)))
def test_step_label_equivariance(seed, perm):
    from bmcluster import PRESETS

    kernel = PRESETS["spectral"].kernel(60)
    counts = simulate_counts(kernel, 1500, seed)
    labels = np.random.default_rng(seed).integers(0, 3, 60)
    labels[:3] = [0, 1, 2]
    perm = np.array(perm)
    out = improvement_step(counts, Partition(labels, 3)).partition.labels
    out_perm = improvement_step(counts, Partition(perm[labels], 3)).partition.labels
    U = improvement_step(counts, Partition(labels, 3)).scores
    top = np.sort(U, axis=1)
    untied = np.abs(top[:, -1] - top[:, -2]) > 1e-9
    # relabelling clusters permutes the output; ties may resolve differently
    assert np.array_equal(perm[out][untied], out_perm[untied])


def test_empty_cluster_halts_iteration():
    one = BmcModel([1.0], [[1.0]]).kernel(6)
    counts = simulate_counts(one, 12, 19)
    start = Partition([1, 0, 0, 1, 0, 0], 2)
    trace = improve(counts, start, 5)
    assert trace.empty_cluster
    assert not trace.final.is_complete
    assert len(trace.partitions) == 1


# --- improve -------------------------------------------------------------


def test_fixed_partition_converges_in_one_step(demo):
    kernel = demo.kernel(300)
    counts = simulate_counts(kernel, 10**5, 1)
    trace = improve(counts, kernel.partition, 4)
    assert trace.converged
    assert trace.reassignments == [0]


def test_default_iterations():
    assert default_iterations(300) == 6
    assert default_iterations(2) == 1


def test_trace_records_and_objective_dominance(demo, tmp_path):
    kernel = demo.kernel(300)
    counts = simulate_counts(kernel, 1973, 4)
    start = spectral_cluster(counts, 3, method="kmeans", random_state=0).clusters
    checked = []

    def audit(i, current, step):
        chosen = step.scores[np.arange(step.scores.shape[0]), step.partition.labels]
        assert np.all(chosen >= step.scores.max(axis=1))
        checked.append(i)

    trace = improve(counts, start, 6, truth=kernel.partition, callback=audit)
    assert checked == list(range(len(trace.partitions)))
    assert len(trace.error_rates) == len(trace.reassignments) == len(trace.partitions)
    assert (trace.reassignments[-1] == 0) == trace.converged
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,reassignments,error_rate"
    assert len(lines) == 1 + len(trace.reassignments)
    assert lines[1].startswith("1,")


def test_objective_dominance_random_instances():
    from bmcluster import PRESETS

    rng = np.random.default_rng(30)
    for trial in range(30):
        model = PRESETS[("demo", "spectral", "improvement")[trial % 3]]
        kernel = model.kernel(90)
        counts = simulate_counts(kernel, int(rng.integers(200, 5000)), trial)
        start = Partition(np.concatenate([[0, 1, 2], rng.integers(0, 3, 87)]), 3)

        def audit(i, current, step):
            picked = step.scores[np.arange(90), step.partition.labels]
            assert np.all(picked >= step.scores.max(axis=1))
            assert np.all(picked == step.scores.max(axis=1))

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ZeroRowWarning)
            improve(counts, start, 5, callback=audit)


def test_max_iters_validation():
    cm = CountMatrix(np.ones((4, 4), dtype=int))
    with pytest.raises(ValueError):
        improve(cm, Partition([0, 0, 1, 1]), 0)
