"""Single-bit-flip Metropolis annealing over a QUBO, vectorizable via numba.

Each read is an independent chain started from a random state and cooled
along a geometric inverse-temperature ladder.  Given the same seed the
sampler is bit-for-bit deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .qubo import QuboMatrix

_UINT32_MOD = np.int64(1) << 32
_GOLDEN = np.int64(0x9E3779B9)


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric ladder from beta_start to beta_end over ``sweeps`` sweeps.

    Unset endpoints are derived from the QUBO's coefficient magnitudes:
    hot enough that the largest coefficient is readily accepted
    (0.1 / max|coeff|) and cold enough that the smallest nonzero one is
    frozen out (10 / min nonzero |coeff|).
    """

    sweeps: int = 1000
    beta_start: float | None = None
    beta_end: float | None = None

    def resolve(self, qubo: QuboMatrix) -> np.ndarray:
        if self.sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {self.sweeps}")
        start, end = self.beta_start, self.beta_end
        if start is None or end is None:
            mags = [abs(c) for c in qubo.coefficients.values() if c != 0.0]
            hot = max(mags) if mags else 1.0
            cold = min(mags) if mags else 1.0
            if start is None:
                start = 0.1 / hot
            if end is None:
                end = 10.0 / cold
        if not start < end:
            raise ValueError(f"beta_start {start} must be < beta_end {end}")
        if self.sweeps == 1:
            return np.array([end])
        return np.geomspace(start, end, self.sweeps)


@njit(cache=True)
def _metropolis_kernel(h, w, betas, num_reads, seed):  # pragma: no cover - jit
    n = h.shape[0]
    states = np.empty((num_reads, n), dtype=np.int8)
    energies = np.empty(num_reads, dtype=np.float64)
    for r in range(num_reads):
        np.random.seed(np.uint32((seed + _GOLDEN * np.int64(r)) % _UINT32_MOD))
        x = np.empty(n, dtype=np.int8)
        for i in range(n):
            x[i] = 1 if np.random.random() < 0.5 else 0
        # local fields: g[i] = h[i] + sum_j w[i, j] * x[j]
        g = h.copy()
        for i in range(n):
            if x[i]:
                for j in range(n):
                    g[j] += w[j, i]
        for s in range(betas.shape[0]):
            beta = betas[s]
            for i in range(n):
                delta = (1.0 - 2.0 * x[i]) * g[i]
                if delta <= 0.0 or np.random.random() < np.exp(-beta * delta):
                    sign = 1.0 - 2.0 * x[i]
                    x[i] = 1 - x[i]
                    for j in range(n):
                        g[j] += sign * w[j, i]
        states[r] = x
        e = 0.0
        for i in range(n):
            if x[i]:
                e += h[i]
                for j in range(i + 1, n):
                    if x[j]:
                        e += w[i, j]
        energies[r] = e
    return states, energies


def anneal_qubo(
    qubo: QuboMatrix,
    num_reads: int,
    seed: int,
    schedule: AnnealSchedule | None = None,
) -> list[tuple[str, float]]:
    """Run the chains and return (bits, energy) samples sorted by energy."""
    schedule = schedule or AnnealSchedule()
    betas = schedule.resolve(qubo)
    h, w = qubo.dense
    states, energies = _metropolis_kernel(
        np.ascontiguousarray(h),
        np.ascontiguousarray(w),
        betas,
        num_reads,
        np.int64(seed % (1 << 62)),
    )
    samples = [
        ("".join("1" if b else "0" for b in states[r]), float(energies[r]))
        for r in range(num_reads)
    ]
    samples.sort(key=lambda se: (se[1], se[0]))
    return samples
