from __future__ import annotations

import numpy as np
import pytest

from qtabu.model import tour_cost
from qtabu.qbsolv_like import solve_qbsolv_like
from qtabu.qubo import InfeasibilityReport, build_atsp_qubo, decode, encode_tour, qubo_from_entries

from conftest import random_instance


def random_qubo(seed: int):
    rng = np.random.default_rng(2000 + seed)
    n = int(rng.integers(8, 17))
    entries = []
    for i in range(n):
        entries.append((i, i, float(rng.normal(0, 2))))
        for j in range(i + 1, n):
            if rng.random() < 0.6:
                entries.append((i, j, float(rng.normal(0, 1))))
    return qubo_from_entries(n, entries)


def exhaustive_minimum(qubo) -> float:
    n = qubo.n_vars
    batch = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(np.float64)
    return float(qubo.energies(batch).min())


def test_atsp_monotone_acceptance_from_random_tour():
    inst = random_instance(6, seed=0)
    qubo = build_atsp_qubo(inst, range(6))
    rng = np.random.default_rng(1)
    start = tuple(int(v) for v in rng.permutation(6))
    initial_cost = tour_cost(inst, start)
    result = solve_qbsolv_like(
        qubo, subqubo_size=12, max_outer_iterations=5, seed=1,
        initial=encode_tour(qubo, start),
    )
    decoded = decode(qubo, result.assignment)
    assert not isinstance(decoded, InfeasibilityReport)
    assert decoded.cost <= initial_cost
    assert result.energy + qubo.offset == pytest.approx(decoded.cost)


def test_small_qubos_reach_global_minimum():
    # threshold frozen at implementation time: 20/20 on this seed ladder,
    # asserted at >= 18/20
    hits = 0
    for seed in range(20):
        qubo = random_qubo(seed)
        res = solve_qbsolv_like(
            qubo, subqubo_size=min(8, qubo.n_vars),
            max_outer_iterations=10, seed=seed,
        )
        if abs(res.energy - exhaustive_minimum(qubo)) < 1e-9:
            hits += 1
    assert hits >= 18, f"global minimum reached only {hits}/20 times"


def test_deterministic_under_seed():
    qubo = random_qubo(3)
    a = solve_qbsolv_like(qubo, subqubo_size=6, max_outer_iterations=5, seed=9)
    b = solve_qbsolv_like(qubo, subqubo_size=6, max_outer_iterations=5, seed=9)
    assert a == b


def test_backend_calls_are_block_solves():
    qubo = random_qubo(4)
    n = qubo.n_vars
    block = 5
    blocks_per_pass = -(-n // block)
    res = solve_qbsolv_like(qubo, subqubo_size=block, max_outer_iterations=3, seed=0)
    assert res.backend_calls % blocks_per_pass == 0
    assert res.backend_calls >= 3 * blocks_per_pass  # at least the stall patience


def test_subqubo_size_validation():
    qubo = random_qubo(5)
    with pytest.raises(ValueError):
        solve_qbsolv_like(qubo, subqubo_size=qubo.n_vars + 1)
    with pytest.raises(ValueError):
        solve_qbsolv_like(qubo, subqubo_size=0)


def test_energy_matches_reported_assignment():
    qubo = random_qubo(6)
    res = solve_qbsolv_like(qubo, subqubo_size=8, max_outer_iterations=4, seed=2)
    assert qubo.energy(res.assignment) == pytest.approx(res.energy)
