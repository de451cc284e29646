"""Decomposing full-QUBO baseline: tabu search plus clamped subQUBO solves.

The solver keeps one current assignment.  Each outer pass (a) improves it by
tabu search over single-bit flips on the full QUBO, then (b) splits all
variables into disjoint blocks of ``subqubo_size`` ordered by how much each
variable's flip would move the energy, and solves the blocks sequentially:
clamp everything outside the block, solve the induced subQUBO with the
configured backend, and re-insert the block when that improves the full
energy.  It stops after ``max_outer_iterations`` consecutive passes without
improvement and reports how many subQUBO backend calls were made (one per
block solve).
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .backends import Backend, BackendRequest, SimulatedAnnealingBackend
from .anneal import AnnealSchedule
from .qubo import QuboMatrix, qubo_from_entries


class QbsolvResult(NamedTuple):
    assignment: str
    energy: float
    backend_calls: int


def _full_energy(h, w, x) -> float:
    return float(x @ h + 0.5 * x @ w @ x)


def _tabu_phase(h, w, x, tenure: int, iterations: int):
    """Best-found state from tabu single-bit-flip search starting at x."""
    n = x.shape[0]
    g = h + w @ x
    e = _full_energy(h, w, x)
    best_x, best_e = x.copy(), e
    tabu_until = np.zeros(n, dtype=np.int64)
    for it in range(iterations):
        delta = (1.0 - 2.0 * x) * g
        allowed = tabu_until <= it
        aspiration = e + delta < best_e - 1e-12
        mask = allowed | aspiration
        if not mask.any():
            continue
        masked = np.where(mask, delta, np.inf)
        i = int(np.argmin(masked))
        sign = 1.0 - 2.0 * x[i]
        x[i] = 1.0 - x[i]
        g += sign * w[:, i]
        e += float(delta[i])
        tabu_until[i] = it + tenure
        if e < best_e - 1e-12:
            best_e = e
            best_x = x.copy()
    return best_x, best_e


def _clamped_subqubo(h, w, x, chosen: np.ndarray) -> QuboMatrix:
    """Induced QUBO over ``chosen`` with all other variables frozen at x."""
    outside = np.ones(x.shape[0], dtype=bool)
    outside[chosen] = False
    x_out = np.where(outside, x, 0.0)
    lin = h[chosen] + w[chosen] @ x_out
    sub_w = w[np.ix_(chosen, chosen)]
    entries = [(a, a, float(lin[a])) for a in range(chosen.shape[0]) if lin[a]]
    iu, ju = np.nonzero(np.triu(sub_w, k=1))
    entries.extend(
        (int(a), int(b), float(sub_w[a, b])) for a, b in zip(iu, ju)
    )
    return qubo_from_entries(len(chosen), entries)


def solve_qbsolv_like(
    qubo: QuboMatrix,
    subqubo_size: int,
    max_outer_iterations: int = 50,
    seed: int = 0,
    backend: Backend | None = None,
    num_reads: int = 20,
    initial: str | None = None,
    tabu_tenure: int | None = None,
    tabu_iterations: int | None = None,
) -> QbsolvResult:
    """Minimize the QUBO by alternating tabu search and block re-solves.

    ``initial`` seeds the current assignment (random bits otherwise); only
    strict improvements are accepted, so the final energy never exceeds the
    initial one.
    """
    n = qubo.n_vars
    if subqubo_size > n:
        raise ValueError(f"subqubo_size {subqubo_size} > n_vars {n}")
    if subqubo_size < 1:
        raise ValueError(f"subqubo_size must be >= 1, got {subqubo_size}")
    if backend is None:
        backend = SimulatedAnnealingBackend(AnnealSchedule(sweeps=300))
    rng = np.random.default_rng(seed)
    h, w = qubo.dense
    if initial is None:
        x = rng.integers(0, 2, size=n).astype(np.float64)
    else:
        x = np.frombuffer(initial.encode(), dtype=np.uint8).astype(np.float64) - ord("0")
        if x.shape != (n,):
            raise ValueError(f"initial assignment must be {n} bits")
    tenure = tabu_tenure if tabu_tenure is not None else max(4, min(20, n // 10))
    iterations = tabu_iterations if tabu_iterations is not None else max(60, n)

    energy = _full_energy(h, w, x)
    best_x, best_e = x.copy(), energy
    calls = 0
    stall = 0
    while stall < max_outer_iterations:
        improved = False

        tx, te = _tabu_phase(h, w, x.copy(), tenure, iterations)
        if te < energy - 1e-12:
            x, energy = tx, te
            improved = True

        # one decomposition pass: impact-ordered disjoint blocks cover all vars
        g = h + w @ x
        impact = np.abs((1.0 - 2.0 * x) * g)
        order = np.argsort(-impact, kind="stable")
        for start in range(0, n, subqubo_size):
            chosen = np.sort(order[start:start + subqubo_size])
            sub = _clamped_subqubo(h, w, x, chosen)
            request = BackendRequest(
                qubo=sub, num_reads=num_reads, seed=int(rng.integers(1 << 62))
            )
            response = backend.sample(request)
            calls += 1
            bits, _ = response.best
            cand = x.copy()
            cand[chosen] = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
            cand_e = _full_energy(h, w, cand)
            if cand_e < energy - 1e-12:
                x, energy = cand, cand_e
                improved = True

        if energy < best_e - 1e-12:
            best_x, best_e = x.copy(), energy
        stall = 0 if improved else stall + 1

    assignment = "".join("1" if b > 0.5 else "0" for b in best_x)
    return QbsolvResult(assignment=assignment, energy=best_e, backend_calls=calls)
