from __future__ import annotations

import numpy as np
import pytest

from qtabu.errors import DegenerateMetric, InfeasibleConstraints, NoLegalMove
from qtabu.model import Partition, make_instance, make_partition, validate_partition
from qtabu.partitioning import (
    ALL_METRICS,
    CALINSKI_HARABASZ,
    DAVIES_BOULDIN,
    MODULARITY,
    insertion_perturb,
    multiform_vns_init,
    random_feasible_partition,
    score_partition,
    similarity_view,
)

from conftest import random_instance


def two_clique_instance():
    """Two 4-node cliques, zero cost inside, high cost across."""
    n = 8
    costs = np.full((n, n), 100, dtype=int)
    for i in range(n):
        for j in range(n):
            if i // 4 == j // 4:
                costs[i, j] = 0
    np.fill_diagonal(costs, 0)
    return make_instance("cliques", costs)


def planted_instance(n: int = 20, seed: int = 0):
    """Two planted blocks: cheap arcs inside, expensive across."""
    rng = np.random.default_rng(seed)
    costs = np.zeros((n, n), dtype=int)
    half = n // 2
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            same = (i < half) == (j < half)
            costs[i, j] = rng.integers(1, 10) if same else rng.integers(500, 600)
    return make_instance("planted", costs)


# --- metrics -----------------------------------------------------------------

def test_modularity_two_cliques_is_half():
    inst = two_clique_instance()
    view = similarity_view(inst)
    # the similarity graph has weight only inside cliques: w = c_max - d
    part = make_partition([0, 0, 0, 0, 1, 1, 1, 1])
    assert score_partition(view, part, MODULARITY) == pytest.approx(0.5)


def test_modularity_single_cluster_is_zero():
    inst = two_clique_instance()
    view = similarity_view(inst)
    part = Partition(labels=(0,) * 8, k=1)
    assert score_partition(view, part, MODULARITY) == pytest.approx(0.0)


def test_modularity_in_range_and_matches_networkx():
    networkx = pytest.importorskip("networkx")
    inst = random_instance(14, seed=3)
    view = similarity_view(inst)
    g = networkx.from_numpy_array(view.similarity)
    for seed in range(5):
        part = random_feasible_partition(14, 5, seed)
        q = score_partition(view, part, MODULARITY)
        assert -1.0 <= q <= 1.0
        communities = [
            {v for v in range(14) if part.labels[v] == c} for c in range(part.k)
        ]
        q_nx = networkx.algorithms.community.modularity(g, communities, weight="weight")
        assert q == pytest.approx(q_nx)


def test_ch_db_match_sklearn_on_embedding():
    metrics = pytest.importorskip("sklearn.metrics")
    inst = random_instance(16, seed=5)
    view = similarity_view(inst)
    x = np.asarray(view.embedding)
    for seed in range(5):
        part = random_feasible_partition(16, 6, seed)
        labels = np.asarray(part.labels)
        ch = score_partition(view, part, CALINSKI_HARABASZ)
        db = score_partition(view, part, DAVIES_BOULDIN)
        assert ch == pytest.approx(metrics.calinski_harabasz_score(x, labels))
        assert db == pytest.approx(metrics.davies_bouldin_score(x, labels))


def test_ch_separated_blobs_beat_random_labelings():
    inst = planted_instance(n=12, seed=1)
    view = similarity_view(inst)
    good = make_partition([0] * 6 + [1] * 6)
    good_score = score_partition(view, good, CALINSKI_HARABASZ)
    rng = np.random.default_rng(0)
    for _ in range(20):
        labels = rng.integers(0, 2, size=12)
        labels[0], labels[-1] = 0, 1  # keep both clusters nonempty
        rand_score = score_partition(view, make_partition(labels), CALINSKI_HARABASZ)
        assert good_score > rand_score


def test_ch_db_degenerate_on_single_cluster():
    inst = random_instance(6, seed=0)
    view = similarity_view(inst)
    single = Partition(labels=(0,) * 6, k=1)
    for metric in (CALINSKI_HARABASZ, DAVIES_BOULDIN):
        with pytest.raises(DegenerateMetric):
            score_partition(view, single, metric)


def test_similarity_view_symmetry_and_range():
    inst = random_instance(10, seed=4)
    view = similarity_view(inst)
    assert np.allclose(view.distance, view.distance.T)
    assert np.allclose(view.similarity, view.similarity.T)
    assert (view.similarity >= 0).all()
    assert np.allclose(np.diag(view.similarity), 0)
    expected = (inst.costs[2, 7] + inst.costs[7, 2]) / 2
    assert view.distance[2, 7] == expected


# --- random partitions -----------------------------------------------------------

def test_random_partition_small():
    part = random_feasible_partition(4, 10, seed=0)
    assert not validate_partition(part, 4, 10)
    assert part.k in (1, 2)


def test_random_partition_deterministic():
    a = random_feasible_partition(20, 7, seed=5)
    b = random_feasible_partition(20, 7, seed=5)
    assert a == b


def test_random_partition_property_sweep():
    for seed in range(1000):
        part = random_feasible_partition(30, 10, seed)
        assert validate_partition(part, 30, 10) == []


def test_random_partition_infeasible():
    with pytest.raises(InfeasibleConstraints):
        random_feasible_partition(5, 2, seed=0)  # odd n, clusters of exactly 2
    with pytest.raises(InfeasibleConstraints):
        random_feasible_partition(1, 10, seed=0)


# --- insertion perturbation -------------------------------------------------------

def test_pair_insertion_rule():
    # moving a node out of a 2-cluster drags its partner along
    part = make_partition((0, 0, 1, 1))
    results = {
        insertion_perturb(part, 10, seed).labels for seed in range(40)
    }
    assert results == {(0, 0, 0, 0)}  # either pair move collapses to one cluster


def test_perturb_changes_at_least_one_label():
    part = random_feasible_partition(20, 6, seed=1)
    for seed in range(50):
        out = insertion_perturb(part, 6, seed)
        assert out.labels != part.labels


def test_perturb_property_sweep():
    part = random_feasible_partition(30, 8, seed=2)
    for seed in range(1000):
        part = insertion_perturb(part, 8, seed)
        assert validate_partition(part, 30, 8) == []
    assert part.n == 30


def test_perturb_no_legal_move():
    single = Partition(labels=(0, 0, 0), k=1)
    with pytest.raises(NoLegalMove):
        insertion_perturb(single, 10, seed=0)


def test_perturb_saturated_targets():
    # two full clusters of max size: single moves overflow, pair moves too
    part = make_partition((0, 0, 1, 1))
    with pytest.raises(NoLegalMove):
        insertion_perturb(part, 2, seed=0)


# --- multiform VNS initializer ------------------------------------------------------

def test_vns_single_cluster_when_instance_fits():
    inst = random_instance(8, seed=0)
    found = multiform_vns_init(inst, 10, budget=10, seed=0)
    assert set(found) == {m.kind for m in ALL_METRICS}
    for part in found.values():
        assert part.k == 1 and part.n == 8


def test_vns_partitions_are_valid():
    inst = random_instance(23, seed=3)
    found = multiform_vns_init(inst, 6, budget=40, seed=1)
    for part in found.values():
        assert validate_partition(part, 23, 6) == []


def test_vns_recovers_planted_blocks():
    inst = planted_instance(n=20, seed=0)
    found = multiform_vns_init(inst, 10, budget=120, seed=4)
    target = {frozenset(range(10)), frozenset(range(10, 20))}
    for kind, part in found.items():
        got = {frozenset(c) for c in part.clusters()}
        assert got == target, f"{kind} failed to recover the planted split: {part.labels}"


def test_vns_monotone_improvement_over_initial():
    inst = random_instance(26, seed=9)
    view = similarity_view(inst)
    seed = 11
    found = multiform_vns_init(inst, 8, budget=60, seed=seed)
    # reproduce the initial incumbents (same derivation as the initializer)
    rng = np.random.default_rng(seed)
    initial = [
        random_feasible_partition(26, 8, int(rng.integers(1 << 62)))
        for _ in ALL_METRICS
    ]
    for metric, start in zip(ALL_METRICS, initial):
        start_score = score_partition(view, start, metric)
        final_score = score_partition(view, found[metric.kind], metric)
        assert metric.better(final_score, start_score) or final_score == start_score


def test_vns_infeasible_constraints():
    inst = random_instance(5, seed=0)
    with pytest.raises(InfeasibleConstraints):
        multiform_vns_init(inst, 2, budget=10, seed=0)
