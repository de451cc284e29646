"""Interchangeable subproblem solvers behind one annealer-style contract.

Backends take a :class:`BackendRequest` holding a QUBO and return a
:class:`BackendResponse` of energy-sorted samples.  The exact and exhaustive
solvers double as oracles for tests; the remote client speaks the HTTP/JSON
protocol served by :mod:`qtabu.server`, so real annealing hardware is a
drop-in replacement.  All backends are stateless per request and
deterministic under a fixed seed.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import permutations
from typing import Iterable, Protocol

import numpy as np
import requests
from numba import njit

from .anneal import AnnealSchedule, anneal_qubo
from .errors import (
    AuthRejected,
    ConnectionFailed,
    MalformedResponse,
    SetTooLarge,
)
from .model import AtspInstance, Tour, canonicalize
from .qubo import QuboMatrix, encode_tour

HELD_KARP_MAX = 20
EXHAUSTIVE_MAX = 10


@dataclass(frozen=True)
class BackendRequest:
    qubo: QuboMatrix
    num_reads: int = 100
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.num_reads < 1:
            raise ValueError(f"num_reads must be >= 1, got {self.num_reads}")


@dataclass(frozen=True)
class BackendResponse:
    """Samples sorted ascending by energy (ties broken by bitstring)."""

    samples: tuple[tuple[str, float], ...]
    backend_name: str
    elapsed: float = 0.0

    @property
    def best(self) -> tuple[str, float]:
        return self.samples[0]


class Backend(Protocol):
    name: str

    def sample(self, request: BackendRequest) -> BackendResponse: ...


# --- exact / exhaustive solvers ----------------------------------------------

@njit(cache=True)
def _held_karp_kernel(c):  # pragma: no cover - jit
    m = c.shape[0]
    full = 1 << m
    inf = np.int64(1) << 60
    dp = np.full((full, m), inf, dtype=np.int64)
    parent = np.full((full, m), -1, dtype=np.int8)
    dp[1, 0] = 0
    for mask in range(1, full, 2):  # node 0 is always in the path
        for last in range(m):
            cur = dp[mask, last]
            if cur >= inf or not (mask >> last) & 1:
                continue
            for nxt in range(1, m):
                if (mask >> nxt) & 1:
                    continue
                nm = mask | (1 << nxt)
                cand = cur + c[last, nxt]
                if cand < dp[nm, nxt]:
                    dp[nm, nxt] = cand
                    parent[nm, nxt] = last
    best = inf
    best_last = 0
    for last in range(1, m):
        cand = dp[full - 1, last] + c[last, 0]
        if cand < best:
            best = cand
            best_last = last
    order = np.zeros(m, dtype=np.int64)
    mask = full - 1
    last = best_last
    for pos in range(m - 1, 0, -1):
        order[pos] = last
        prev = parent[mask, last]
        mask ^= 1 << last
        last = prev
    return best, order


def solve_exact_heldkarp(instance: AtspInstance, nodes: Iterable[int]) -> Tour:
    """Minimum-cost closed tour over the node set via subset DP.

    O(2^m * m^2) time and O(2^m * m) memory; capped at m = 20.  Among
    equal-cost optima the first one found in DP order is returned.
    """
    node_list = sorted(int(v) for v in nodes)
    m = len(node_list)
    if m > HELD_KARP_MAX:
        raise SetTooLarge(f"{m} nodes > Held-Karp cap {HELD_KARP_MAX}")
    if m < 2:
        raise ValueError(f"need at least 2 nodes, got {m}")
    if m == 2:
        a, b = node_list
        cost = instance.cost(a, b) + instance.cost(b, a)
        return Tour(nodes=(a, b), cost=cost)
    sub = np.ascontiguousarray(instance.costs[np.ix_(node_list, node_list)])
    best, order = _held_karp_kernel(sub)
    tour_nodes = tuple(node_list[i] for i in order)
    return canonicalize(Tour(nodes=tour_nodes, cost=int(best)))


def solve_exhaustive(instance: AtspInstance, nodes: Iterable[int]) -> Tour:
    """Enumerate all (m-1)! directed cycles with the minimum node fixed first.

    Ties go to the lexicographically smallest node sequence (which is the
    first one the sorted enumeration produces).
    """
    node_list = sorted(int(v) for v in nodes)
    m = len(node_list)
    if m > EXHAUSTIVE_MAX:
        raise SetTooLarge(f"{m} nodes > exhaustive cap {EXHAUSTIVE_MAX}")
    if m < 2:
        raise ValueError(f"need at least 2 nodes, got {m}")
    first = node_list[0]
    rest = node_list[1:]
    costs = instance.costs
    best_cost: int | None = None
    best_order: tuple[int, ...] = ()
    for perm in permutations(rest):
        order = (first, *perm)
        cost = 0
        for k in range(m):
            cost += costs[order[k], order[(k + 1) % m]]
        cost = int(cost)
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_order = order
    return Tour(nodes=best_order, cost=best_cost)


# --- sampler backends ---------------------------------------------------------

def sample_simulated_annealing(
    request: BackendRequest, schedule: AnnealSchedule | None = None
) -> BackendResponse:
    """Independent Metropolis chains over the QUBO; deterministic given seed."""
    t0 = time.perf_counter()
    seed = request.seed if request.seed is not None else 0
    samples = anneal_qubo(request.qubo, request.num_reads, seed, schedule)
    return BackendResponse(
        samples=tuple(samples),
        backend_name="sa",
        elapsed=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class SimulatedAnnealingBackend:
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    name: str = "sa"

    def sample(self, request: BackendRequest) -> BackendResponse:
        return sample_simulated_annealing(request, self.schedule)


@dataclass(frozen=True)
class ExactBackend:
    """Drop-in backend solving each cluster QUBO exactly via Held-Karp.

    Responds with the single optimal permutation-matrix assignment; its
    energy is the QUBO's own evaluation of that assignment, so the response
    obeys the same contract as the samplers.
    """

    instance: AtspInstance
    name: str = "exact"

    def sample(self, request: BackendRequest) -> BackendResponse:
        t0 = time.perf_counter()
        qubo = request.qubo
        if qubo.cluster_nodes is None:
            raise ValueError("exact backend needs a tour QUBO")
        tour = solve_exact_heldkarp(self.instance, qubo.cluster_nodes)
        bits = encode_tour(qubo, tour.nodes)
        return BackendResponse(
            samples=((bits, qubo.energy(bits)),),
            backend_name=self.name,
            elapsed=time.perf_counter() - t0,
        )


# --- remote annealer client ---------------------------------------------------

def solve_remote(
    request: BackendRequest,
    endpoint: str,
    auth_token: str | None = None,
    timeout: float = 30.0,
) -> BackendResponse:
    """POST the serialized QUBO to a remote annealer and parse its samples.

    One call here is one backend call regardless of num_reads.  Failures are
    surfaced as ConnectionFailed / AuthRejected / MalformedResponse so the
    caller can release any reserved budget.
    """
    qubo = request.qubo
    body = {
        "n_vars": qubo.n_vars,
        "offset": qubo.offset,
        "entries": [[i, j, c] for (i, j), c in sorted(qubo.coefficients.items())],
        "num_reads": request.num_reads,
        "seed": request.seed,
    }
    headers = {}
    if auth_token:
        headers["Authorization"] = f"Bearer {auth_token}"
    t0 = time.perf_counter()
    try:
        resp = requests.post(endpoint, json=body, headers=headers, timeout=timeout)
    except (requests.ConnectionError, requests.Timeout) as exc:
        raise ConnectionFailed(f"POST {endpoint} failed: {exc}") from exc
    if resp.status_code in (401, 403):
        raise AuthRejected(f"{endpoint} rejected the token ({resp.status_code})")
    if resp.status_code != 200:
        raise ConnectionFailed(f"{endpoint} returned HTTP {resp.status_code}")
    try:
        payload = resp.json()
        raw = payload["samples"]
        samples = [(str(s["bits"]), float(s["energy"])) for s in raw]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedResponse(f"bad response body from {endpoint}: {exc}") from exc
    for bits, energy in samples:
        if len(bits) != qubo.n_vars or set(bits) - {"0", "1"}:
            raise MalformedResponse(f"bad bitstring {bits!r}")
        local = qubo.energy(bits)
        tol = 1e-9 * max(1.0, abs(local))
        if abs(local - energy) > tol:
            raise MalformedResponse(
                f"energy {energy} inconsistent with local evaluation {local}"
            )
    samples.sort(key=lambda se: (se[1], se[0]))
    return BackendResponse(
        samples=tuple(samples),
        backend_name="remote",
        elapsed=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class RemoteBackend:
    endpoint: str
    auth_token: str | None = None
    timeout: float = 30.0
    name: str = "remote"

    def sample(self, request: BackendRequest) -> BackendResponse:
        return solve_remote(request, self.endpoint, self.auth_token, self.timeout)
