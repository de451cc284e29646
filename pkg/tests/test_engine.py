from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from qtabu.backends import (
    BackendRequest,
    BackendResponse,
    ExactBackend,
    SimulatedAnnealingBackend,
    solve_exact_heldkarp,
    solve_exhaustive,
)
from qtabu.anneal import AnnealSchedule
from qtabu.engine import (
    Budget,
    QtaConfig,
    SubSolution,
    TabuDictionary,
    best_bridge,
    greedy_merge,
    run_qta,
    solve_cluster_cached,
)
from qtabu.errors import BudgetExhausted, ConnectionFailed, CoverageError
from qtabu.model import tour_cost
from qtabu.tsplib import load_instance

from conftest import random_instance, require_fixture


def sub_for(instance, nodes) -> SubSolution:
    tour = solve_exhaustive(instance, nodes)
    return SubSolution(tour=tour, source_backend="exact", energy=float(tour.cost))


# --- cache + budget ---------------------------------------------------------------

def test_cache_hit_consumes_no_budget():
    inst = random_instance(8, seed=0)
    backend = ExactBackend(inst)
    tabu, budget = TabuDictionary(), Budget(10)
    first = solve_cluster_cached(inst, (1, 3, 5), backend, tabu, budget)
    second = solve_cluster_cached(inst, (1, 3, 5), backend, tabu, budget)
    assert budget.used == 1
    assert tabu.hits == 1 and tabu.misses == 1
    assert first is second


def test_cache_key_is_order_insensitive():
    inst = random_instance(10, seed=1)
    backend = ExactBackend(inst)
    tabu, budget = TabuDictionary(), Budget(10)
    solve_cluster_cached(inst, (2, 5, 9), backend, tabu, budget)
    solve_cluster_cached(inst, (9, 2, 5), backend, tabu, budget)
    solve_cluster_cached(inst, (5, 9, 2), backend, tabu, budget)
    assert len(tabu.entries) == 1
    assert budget.used == 1
    assert tabu.hits == 2


def test_budget_exhaustion_on_41st_miss():
    inst = random_instance(45, seed=2)
    backend = ExactBackend(inst)
    tabu, budget = TabuDictionary(), Budget(40)
    clusters = list(combinations(range(45), 2))
    for cluster in clusters[:40]:
        solve_cluster_cached(inst, cluster, backend, tabu, budget)
    assert budget.used == 40
    with pytest.raises(BudgetExhausted):
        solve_cluster_cached(inst, clusters[40], backend, tabu, budget)
    # hits still work after exhaustion
    solve_cluster_cached(inst, clusters[0], backend, tabu, budget)
    assert budget.used == 40


def test_failed_backend_call_releases_budget():
    class FailingBackend:
        name = "broken"

        def sample(self, request: BackendRequest) -> BackendResponse:
            raise ConnectionFailed("nope")

    inst = random_instance(6, seed=3)
    tabu, budget = TabuDictionary(), Budget(5)
    with pytest.raises(ConnectionFailed):
        solve_cluster_cached(inst, (0, 1, 2), FailingBackend(), tabu, budget)
    assert budget.used == 0
    assert len(tabu.entries) == 0


def test_all_infeasible_samples_fall_back_without_budget():
    class GarbageBackend:
        name = "garbage"

        def sample(self, request: BackendRequest) -> BackendResponse:
            return BackendResponse(
                samples=(("0" * request.qubo.n_vars, 0.0),),
                backend_name="garbage",
            )

    inst = random_instance(6, seed=4)
    tabu, budget = TabuDictionary(), Budget(5)
    sub = solve_cluster_cached(inst, (0, 1, 2), GarbageBackend(), tabu, budget)
    assert budget.used == 1  # the backend call itself still costs one unit
    assert sub.source_backend == "garbage+fallback"
    assert sub.tour.cost == solve_exhaustive(inst, (0, 1, 2)).cost
    assert tabu.fallbacks == 1


# --- merge ------------------------------------------------------------------------

def test_merge_single_subsolution_unchanged():
    inst = random_instance(6, seed=5)
    sub = sub_for(inst, range(6))
    merged = greedy_merge(inst, [sub])
    assert merged.nodes == sub.tour.nodes
    assert merged.cost == sub.tour.cost


def brute_force_two_loop_merge(inst, a, b) -> int:
    """Oracle: minimum over all bridge pairs of the reconnection cost."""
    best = None
    la, lb = list(a), list(b)
    arcs_a = [(la[i], la[(i + 1) % len(la)]) for i in range(len(la))]
    arcs_b = [(lb[i], lb[(i + 1) % len(lb)]) for i in range(len(lb))]
    base_a = tour_cost(inst, la)
    base_b = tour_cost(inst, lb)
    c = inst.costs
    for u, v in arcs_a:
        for x, y in arcs_b:
            delta = int(c[u, y] + c[x, v] - c[u, v] - c[x, y])
            total = base_a + base_b + delta
            if best is None or total < best:
                best = total
    return best


@pytest.mark.parametrize("rep", range(50))
def test_two_loop_merge_matches_bridge_oracle(rep):
    rng = np.random.default_rng(700 + rep)
    n = int(rng.integers(6, 11))
    inst = random_instance(n, seed=rep)
    split = int(rng.integers(3, n - 2))
    nodes = list(rng.permutation(n))
    a, b = nodes[:split], nodes[split:]
    if len(a) < 2 or len(b) < 2:
        return
    sub_a = sub_for(inst, a)
    sub_b = sub_for(inst, b)
    merged = greedy_merge(inst, [sub_a, sub_b])
    oracle = brute_force_two_loop_merge(inst, sub_a.tour.nodes, sub_b.tour.nodes)
    assert merged.cost == oracle
    assert sorted(merged.nodes) == list(range(n))
    assert tour_cost(inst, merged.nodes) == merged.cost


def test_merge_hamiltonicity_property_sweep():
    for rep in range(200):
        rng = np.random.default_rng(3000 + rep)
        n = int(rng.integers(6, 16))
        inst = random_instance(n, seed=rep)
        nodes = list(rng.permutation(n))
        subs = []
        while nodes:
            take = int(rng.integers(2, 5))
            if len(nodes) - take == 1:
                take += 1
            chunk, nodes = nodes[:take], nodes[take:]
            if len(chunk) < 2:
                subs[-1] = sub_for(inst, list(subs[-1].tour.nodes) + chunk)
            else:
                subs.append(sub_for(inst, chunk))
        merged = greedy_merge(inst, subs)
        assert sorted(merged.nodes) == list(range(n))
        assert tour_cost(inst, merged.nodes) == merged.cost


def test_merge_rejects_bad_cover():
    inst = random_instance(6, seed=6)
    with pytest.raises(CoverageError):
        greedy_merge(inst, [sub_for(inst, (0, 1, 2))])
    with pytest.raises(CoverageError):
        greedy_merge(inst, [sub_for(inst, (0, 1, 2)), sub_for(inst, (2, 3, 4, 5))])


def test_best_bridge_reports_delta():
    inst = random_instance(8, seed=7)
    a = solve_exhaustive(inst, (0, 1, 2, 3)).nodes
    b = solve_exhaustive(inst, (4, 5, 6, 7)).nodes
    bridge = best_bridge(inst, a, b)
    c = inst.costs
    u, v = bridge.removed_arc_a
    x, y = bridge.removed_arc_b
    assert bridge.added_arc_1 == (u, y) and bridge.added_arc_2 == (x, v)
    assert bridge.delta_cost == int(c[u, y] + c[x, v] - c[u, v] - c[x, y])


# --- run_qta -----------------------------------------------------------------------

def test_run_qta_br17_exact_hits_39():
    inst = load_instance(require_fixture("br17"))
    report = run_qta(inst, QtaConfig(backend=ExactBackend(inst), seed=0))
    assert report.best_cost == 39
    assert sorted(report.best_tour) == list(range(17))
    assert report.backend_calls <= 40


def test_run_qta_budget_respected():
    inst = random_instance(24, seed=8)
    report = run_qta(inst, QtaConfig(backend=ExactBackend(inst), seed=1))
    assert report.backend_calls <= 40
    assert report.cache_hits + report.cache_misses >= report.backend_calls


def test_run_qta_deterministic():
    inst = random_instance(18, seed=9)
    cfg = QtaConfig(backend=ExactBackend(inst), seed=7)
    a = run_qta(inst, cfg)
    b = run_qta(inst, cfg)
    assert a.to_dict(include_timing=False) == b.to_dict(include_timing=False)


def test_run_qta_tour_is_hamiltonian_and_cost_consistent():
    inst = random_instance(15, seed=10)
    report = run_qta(inst, QtaConfig(backend=ExactBackend(inst), seed=2))
    assert sorted(report.best_tour) == list(range(15))
    assert tour_cost(inst, report.best_tour) == report.best_cost


def test_run_qta_single_cluster_returns_optimum():
    inst = random_instance(9, seed=11)
    report = run_qta(inst, QtaConfig(backend=ExactBackend(inst), seed=3))
    assert report.best_cost == solve_exact_heldkarp(inst, range(9)).cost


def test_run_qta_never_beats_held_karp():
    for seed in range(5):
        inst = random_instance(12, seed=100 + seed)
        optimum = solve_exact_heldkarp(inst, range(12)).cost
        report = run_qta(inst, QtaConfig(backend=ExactBackend(inst), seed=seed))
        assert report.best_cost >= optimum


def test_run_qta_best_cost_is_running_minimum_of_trace():
    inst = random_instance(20, seed=12)
    report = run_qta(inst, QtaConfig(backend=ExactBackend(inst), seed=4))
    costs = [c for _, c, _ in report.iteration_trace]
    assert report.best_cost == min(costs)
    used = [u for _, _, u in report.iteration_trace]
    assert used == sorted(used)  # budget use never decreases
    assert used[-1] <= 40


def test_run_qta_budget_zero_uses_fallback():
    inst = random_instance(14, seed=13)
    report = run_qta(
        inst, QtaConfig(backend=ExactBackend(inst), seed=5, budget=0, init="random")
    )
    assert report.backend_calls == 0
    assert report.note is not None and "fallback" in report.note
    assert sorted(report.best_tour) == list(range(14))
    assert tour_cost(inst, report.best_tour) == report.best_cost
    assert report.fallback_solves > 0


def test_run_qta_with_sa_backend_smoke():
    inst = random_instance(12, seed=14)
    cfg = QtaConfig(
        backend=SimulatedAnnealingBackend(AnnealSchedule(sweeps=200)),
        seed=6,
        num_reads=20,
        max_iterations=30,
    )
    report = run_qta(inst, cfg)
    assert sorted(report.best_tour) == list(range(12))
    assert report.backend_calls <= 40


def test_run_qta_random_init_mode():
    inst = random_instance(13, seed=15)
    report = run_qta(
        inst, QtaConfig(backend=ExactBackend(inst), seed=8, init="random")
    )
    assert sorted(report.best_tour) == list(range(13))
