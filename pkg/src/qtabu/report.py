"""Per-run reports and benchmark aggregation.

All numbers in a report derive deterministically from the run's seed; the
single exception is ``elapsed`` wall-clock time, which serializers can omit
(``include_timing=False``) to produce byte-identical artifacts for identical
command lines and seeds.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

METHODS = ("QTA", "QBSOLV_LIKE", "EXACT")


@dataclass(frozen=True)
class RunReport:
    """One solver run: best tour, call accounting, iteration trace."""

    instance_name: str
    method: str
    backend: str
    best_cost: int | None
    best_tour: tuple[int, ...] | None
    backend_calls: int
    cache_hits: int
    elapsed: float
    seed: int
    iteration_trace: tuple[tuple[int, int, int], ...] = ()
    cache_misses: int = 0
    fallback_solves: int = 0
    note: str | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "instance_name": self.instance_name,
            "method": self.method,
            "backend": self.backend,
            "best_cost": self.best_cost,
            "best_tour": list(self.best_tour) if self.best_tour is not None else None,
            "backend_calls": self.backend_calls,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "fallback_solves": self.fallback_solves,
            "seed": self.seed,
            "iteration_trace": [list(t) for t in self.iteration_trace],
            "note": self.note,
        }
        if include_timing:
            d["elapsed"] = self.elapsed
        return d

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True) + "\n"

    def summary_line(self) -> str:
        return (
            f"{self.instance_name} [{self.method}/{self.backend}] "
            f"best={self.best_cost} calls={self.backend_calls} "
            f"hits={self.cache_hits} elapsed={self.elapsed:.2f}s seed={self.seed}"
        )


@dataclass(frozen=True)
class BenchRow:
    instance: str
    method: str
    avg: float
    std: float
    best: int
    avg_calls: float


@dataclass(frozen=True)
class BenchSummary:
    """Aggregate over seeded repetitions, one row per (instance, method).

    ``std`` is the population standard deviation over the repetitions.
    """

    rows: tuple[BenchRow, ...]
    reps: int
    base_seed: int
    reports: tuple[RunReport, ...] = field(default=(), repr=False)

    CSV_HEADER = "instance,method,avg,std,best,avg_calls"

    def to_csv(self) -> str:
        lines = [
            "# std = population standard deviation over repetitions",
            self.CSV_HEADER,
        ]
        for r in self.rows:
            lines.append(
                f"{r.instance},{r.method},{r.avg!r},{r.std!r},{r.best},{r.avg_calls!r}"
            )
        return "\n".join(lines) + "\n"

    def to_dict(self, include_timing: bool = True) -> dict:
        return {
            "reps": self.reps,
            "base_seed": self.base_seed,
            "rows": [
                {
                    "instance": r.instance,
                    "method": r.method,
                    "avg": r.avg,
                    "std": r.std,
                    "best": r.best,
                    "avg_calls": r.avg_calls,
                }
                for r in self.rows
            ],
            "runs": [rep.to_dict(include_timing) for rep in self.reports],
        }

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True) + "\n"

    def table(self) -> str:
        widths = (12, 12, 10, 10, 8, 10)
        head = ("Instance", "Method", "Avg", "Std", "Best", "AvgCalls")
        lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
        for r in self.rows:
            cells = (
                r.instance,
                r.method,
                f"{r.avg:.1f}",
                f"{r.std:.2f}",
                str(r.best),
                f"{r.avg_calls:.1f}",
            )
            lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
        return "\n".join(lines)


def _population_std(values: Sequence[float]) -> float:
    mean = sum(values) / len(values)
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


def aggregate_reports(
    reports: Iterable[RunReport], reps: int, base_seed: int
) -> BenchSummary:
    """Group by (instance, method), sorted by seed inside each group."""
    groups: dict[tuple[str, str], list[RunReport]] = {}
    for rep in reports:
        groups.setdefault((rep.instance_name, rep.method), []).append(rep)
    rows = []
    ordered: list[RunReport] = []
    for (instance, method), runs in sorted(groups.items()):
        runs = sorted(runs, key=lambda r: r.seed)
        ordered.extend(runs)
        costs = [float(r.best_cost) for r in runs]
        rows.append(
            BenchRow(
                instance=instance,
                method=method,
                avg=sum(costs) / len(costs),
                std=_population_std(costs),
                best=int(min(r.best_cost for r in runs)),
                avg_calls=sum(r.backend_calls for r in runs) / len(runs),
            )
        )
    return BenchSummary(
        rows=tuple(rows), reps=reps, base_seed=base_seed, reports=tuple(ordered)
    )
