"""Decomposition engine: cached cluster solving under a strict call budget,
greedy merging of sub-tours, and the accept/perturb outer loop.

Already-solved clusters live in a :class:`TabuDictionary` keyed by the sorted
node set, so re-encountering a cluster never spends another backend call.
The budget counts successful backend invocations only: cache hits are free,
failed remote calls release their reserved unit, and the classical fallback
for all-infeasible samples is free as well (but flagged in the report).
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .backends import (
    Backend,
    BackendRequest,
    EXHAUSTIVE_MAX,
    HELD_KARP_MAX,
    solve_exact_heldkarp,
    solve_exhaustive,
)
from .errors import BackendError, BudgetExhausted, CoverageError, NoLegalMove, SetTooLarge
from .model import AtspInstance, Partition, Tour, canonicalize, make_tour, validate_partition
from .partitioning import insertion_perturb, multiform_vns_init, random_feasible_partition
from .qubo import InfeasibilityReport, build_atsp_qubo, decode, encode_tour
from .report import RunReport


@dataclass(frozen=True)
class SubSolution:
    """An optimized closed loop over one cluster."""

    tour: Tour
    source_backend: str
    energy: float


class TabuDictionary:
    """Cache of previously optimized clusters, keyed by sorted node tuple."""

    def __init__(self) -> None:
        self.entries: dict[tuple[int, ...], SubSolution] = {}
        self.hits = 0
        self.misses = 0
        self.fallbacks = 0
        self._lock = threading.Lock()

    @staticmethod
    def key_for(cluster: Iterable[int]) -> tuple[int, ...]:
        return tuple(sorted(int(v) for v in cluster))

    def lookup(self, key: tuple[int, ...]) -> SubSolution | None:
        """Fetch a cached subsolution, counting the hit or miss."""
        with self._lock:
            found = self.entries.get(key)
            if found is None:
                self.misses += 1
            else:
                self.hits += 1
            return found

    def store(self, key: tuple[int, ...], sub: SubSolution) -> None:
        with self._lock:
            self.entries[key] = sub

    def record_fallback(self) -> None:
        with self._lock:
            self.fallbacks += 1


class Budget:
    """Backend-call allowance; ``used <= max_calls`` holds at all times."""

    def __init__(self, max_calls: int) -> None:
        self.max_calls = max_calls
        self.used = 0
        self._lock = threading.Lock()

    def reserve(self) -> None:
        with self._lock:
            if self.used >= self.max_calls:
                raise BudgetExhausted(
                    f"all {self.max_calls} backend calls consumed"
                )
            self.used += 1

    def release(self) -> None:
        with self._lock:
            self.used -= 1


def _fallback_solve(instance: AtspInstance, nodes: tuple[int, ...]) -> Tour:
    if len(nodes) <= EXHAUSTIVE_MAX:
        return solve_exhaustive(instance, nodes)
    if len(nodes) <= HELD_KARP_MAX:
        return solve_exact_heldkarp(instance, nodes)
    raise SetTooLarge(f"no classical fallback for {len(nodes)} nodes")


def solve_cluster_cached(
    instance: AtspInstance,
    cluster: Iterable[int],
    backend: Backend,
    tabu: TabuDictionary,
    budget: Budget,
    num_reads: int = 100,
    seed_source: Callable[[], int] | None = None,
) -> SubSolution:
    """Return the cluster's optimized loop, consulting the cache first.

    A hit costs nothing.  A miss reserves one budget unit before dispatch
    (raising BudgetExhausted when none are left), builds the cluster QUBO,
    invokes the backend, and decodes the best feasible sample.  If every
    sample is infeasible the exact classical solver fills in without extra
    budget, flagged via ``source_backend``.  Failed backend calls release
    the reserved unit and re-raise.
    """
    key = TabuDictionary.key_for(cluster)
    cached = tabu.lookup(key)
    if cached is not None:
        return cached

    budget.reserve()
    qubo = build_atsp_qubo(instance, key)
    seed = seed_source() if seed_source is not None else 0
    request = BackendRequest(qubo=qubo, num_reads=num_reads, seed=seed)
    try:
        response = backend.sample(request)
    except BackendError:
        budget.release()
        raise

    sub: SubSolution | None = None
    for bits, energy in response.samples:
        decoded = decode(qubo, bits)
        if not isinstance(decoded, InfeasibilityReport):
            sub = SubSolution(tour=decoded, source_backend=response.backend_name,
                              energy=energy)
            break
    if sub is None:
        tour = _fallback_solve(instance, key)
        bits = encode_tour(qubo, tour.nodes)
        sub = SubSolution(
            tour=tour,
            source_backend=f"{response.backend_name}+fallback",
            energy=qubo.energy(bits),
        )
        tabu.record_fallback()
    tabu.store(key, sub)
    return sub


# --- merging -------------------------------------------------------------------

@dataclass(frozen=True)
class Bridge:
    """Reconnection fusing two closed loops: drop one arc from each, add two."""

    removed_arc_a: tuple[int, int]
    removed_arc_b: tuple[int, int]
    added_arc_1: tuple[int, int]
    added_arc_2: tuple[int, int]
    delta_cost: int


def _arcs(nodes: Sequence[int]) -> list[tuple[int, int]]:
    size = len(nodes)
    return [(nodes[k], nodes[(k + 1) % size]) for k in range(size)]


def best_bridge(instance: AtspInstance, current: Sequence[int],
                incoming: Sequence[int]) -> Bridge:
    """Cheapest directed reconnection between two disjoint loops.

    Removing (u, v) from the current loop and (x, y) from the incoming one
    and adding (u, y) and (x, v) yields a single cycle.  Ties break on the
    lexicographically smallest (added_arc_1, added_arc_2).
    """
    c = instance.costs
    best: Bridge | None = None
    for u, v in _arcs(current):
        for x, y in _arcs(incoming):
            delta = int(c[u, y] + c[x, v] - c[u, v] - c[x, y])
            cand = Bridge(
                removed_arc_a=(u, v),
                removed_arc_b=(x, y),
                added_arc_1=(u, y),
                added_arc_2=(x, v),
                delta_cost=delta,
            )
            if (
                best is None
                or delta < best.delta_cost
                or (delta == best.delta_cost
                    and (cand.added_arc_1, cand.added_arc_2)
                    < (best.added_arc_1, best.added_arc_2))
            ):
                best = cand
    assert best is not None
    return best


def _fuse(current: Sequence[int], incoming: Sequence[int], bridge: Bridge) -> tuple[int, ...]:
    u, v = bridge.removed_arc_a
    x, y = bridge.removed_arc_b
    cur = list(current)
    inc = list(incoming)
    ci = cur.index(v)
    cur = cur[ci:] + cur[:ci]          # v ... u
    ii = inc.index(y)
    inc = inc[ii:] + inc[:ii]          # y ... x
    return tuple(cur + inc)            # v..u -> y..x -> v


def greedy_merge(instance: AtspInstance, subsolutions: Sequence[SubSolution]) -> Tour:
    """Fuse sub-tours into one Hamiltonian cycle, largest loop first.

    Each fusion picks the minimum-delta bridge over all arc pairs.  The
    subsolutions must cover every node exactly once.
    """
    if not subsolutions:
        raise CoverageError("no subsolutions to merge")
    seen: set[int] = set()
    for sub in subsolutions:
        nodes = set(sub.tour.nodes)
        if nodes & seen:
            raise CoverageError(f"overlapping clusters at {sorted(nodes & seen)}")
        seen |= nodes
    if seen != set(range(instance.n)):
        missing = sorted(set(range(instance.n)) - seen)
        raise CoverageError(f"clusters do not cover nodes {missing[:10]}")

    order = sorted(
        subsolutions, key=lambda s: (-len(s.tour.nodes), min(s.tour.nodes))
    )
    merged = order[0].tour.nodes
    for sub in order[1:]:
        bridge = best_bridge(instance, merged, sub.tour.nodes)
        merged = _fuse(merged, sub.tour.nodes, bridge)
    return make_tour(instance, merged)


# --- the outer loop --------------------------------------------------------------

@dataclass
class QtaConfig:
    """Knobs for one engine run; everything downstream of ``seed`` is
    deterministic as long as ``wall_clock_limit`` stays None."""

    backend: Backend
    max_cluster_size: int = 10
    budget: int = 40
    seed: int = 0
    init: str = "multiform"         # "multiform" | "random"
    num_reads: int = 100
    max_iterations: int = 400
    wall_clock_limit: float | None = None
    vns_budget: int = 200


def run_qta(instance: AtspInstance, config: QtaConfig) -> RunReport:
    """Partition, solve clusters through the cache, merge, perturb, repeat.

    Terminates when the call budget is exhausted, ``max_iterations`` is
    reached, or the optional wall-clock limit passes.  Returns the best tour
    with full accounting.
    """
    t0 = time.perf_counter()
    n = instance.n
    ss = np.random.SeedSequence(config.seed)
    init_ss, perturb_ss, backend_ss = ss.spawn(3)
    perturb_rng = np.random.default_rng(perturb_ss)
    backend_rng = np.random.default_rng(backend_ss)

    def backend_seed() -> int:
        return int(backend_rng.integers(1 << 62))

    tabu = TabuDictionary()
    budget = Budget(config.budget)
    trace: list[tuple[int, int, int]] = []
    note: str | None = None

    def evaluate(partition: Partition, free_fallback: bool = False) -> Tour:
        subs = []
        for cluster in partition.clusters():
            if free_fallback:
                key = TabuDictionary.key_for(cluster)
                cached = tabu.lookup(key)
                if cached is None:
                    tour = _fallback_solve(instance, key)
                    cached = SubSolution(tour=tour, source_backend="fallback",
                                         energy=float(tour.cost))
                    tabu.record_fallback()
                    tabu.store(key, cached)
                subs.append(cached)
            else:
                subs.append(solve_cluster_cached(
                    instance, cluster, config.backend, tabu, budget,
                    num_reads=config.num_reads, seed_source=backend_seed,
                ))
        return greedy_merge(instance, subs)

    # --- initialization: candidate partitions
    init_seed = int(np.random.default_rng(init_ss).integers(1 << 62))
    if config.init == "multiform":
        found = multiform_vns_init(
            instance, config.max_cluster_size,
            budget=config.vns_budget, seed=init_seed,
        )
        candidates: list[Partition] = []
        for part in found.values():
            if part not in candidates:
                candidates.append(part)
    elif config.init == "random":
        candidates = [
            random_feasible_partition(n, config.max_cluster_size, init_seed)
        ]
    else:
        raise ValueError(f"unknown init mode {config.init!r}")

    best_tour: Tour | None = None
    best_partition: Partition | None = None
    iteration = 0
    exhausted = False

    for part in candidates:
        bad = validate_partition(part, n, config.max_cluster_size)
        if bad:
            raise ValueError(f"initializer produced invalid partition: {bad}")
        try:
            tour = evaluate(part)
        except BudgetExhausted:
            if best_tour is None:
                tour = evaluate(part, free_fallback=True)
                note = ("budget exhausted before the first complete evaluation; "
                        "remaining clusters solved by the classical fallback")
                trace.append((iteration, tour.cost, budget.used))
                iteration += 1
                best_tour, best_partition = tour, part
            exhausted = True
            break
        trace.append((iteration, tour.cost, budget.used))
        iteration += 1
        if best_tour is None or tour.cost < best_tour.cost:
            best_tour, best_partition = tour, part

    # --- accept/perturb loop
    current = best_partition
    while (
        not exhausted
        and iteration < config.max_iterations
        and (config.wall_clock_limit is None
             or time.perf_counter() - t0 < config.wall_clock_limit)
    ):
        try:
            cand = insertion_perturb(current, config.max_cluster_size,
                                     int(perturb_rng.integers(1 << 62)))
        except NoLegalMove:
            cand = random_feasible_partition(
                n, config.max_cluster_size, int(perturb_rng.integers(1 << 62))
            )
        try:
            tour = evaluate(cand)
        except BudgetExhausted:
            exhausted = True
            break
        trace.append((iteration, tour.cost, budget.used))
        iteration += 1
        if tour.cost < best_tour.cost:
            best_tour = tour
            current = cand

    best_tour = canonicalize(best_tour)
    return RunReport(
        instance_name=instance.name,
        method="QTA",
        backend=getattr(config.backend, "name", "unknown"),
        best_cost=best_tour.cost,
        best_tour=best_tour.nodes,
        backend_calls=budget.used,
        cache_hits=tabu.hits,
        cache_misses=tabu.misses,
        fallback_solves=tabu.fallbacks,
        elapsed=time.perf_counter() - t0,
        seed=config.seed,
        iteration_trace=tuple(trace),
        note=note,
    )
