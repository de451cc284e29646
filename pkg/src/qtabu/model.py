"""Core problem/solution data types: instances, tours, partitions, objective.

All types are immutable value objects; operations return new values instead
of mutating, so everything here is safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DuplicateNode, MalformedHeader, NodeOutOfRange, UnsupportedFormat

EDGE_WEIGHT_TYPES = ("EXPLICIT", "EUC_2D", "CEIL_2D", "GEO", "ATT")
EDGE_WEIGHT_FORMATS = (
    "FULL_MATRIX",
    "UPPER_ROW",
    "LOWER_ROW",
    "UPPER_DIAG_ROW",
    "LOWER_DIAG_ROW",
)
PROBLEM_TYPES = ("ATSP", "TSP")


@dataclass(frozen=True)
class TsplibHeader:
    """Parsed TSPLIB header block."""

    name: str
    problem_type: str
    dimension: int
    edge_weight_type: str
    edge_weight_format: str | None = None
    comment: str | None = None

    def __post_init__(self) -> None:
        if self.problem_type not in PROBLEM_TYPES:
            raise UnsupportedFormat(f"TYPE {self.problem_type!r} not supported")
        if self.edge_weight_type not in EDGE_WEIGHT_TYPES:
            raise UnsupportedFormat(
                f"EDGE_WEIGHT_TYPE {self.edge_weight_type!r} not supported"
            )
        if self.edge_weight_format is not None and (
            self.edge_weight_format not in EDGE_WEIGHT_FORMATS
        ):
            raise UnsupportedFormat(
                f"EDGE_WEIGHT_FORMAT {self.edge_weight_format!r} not supported"
            )
        if self.dimension < 2:
            raise MalformedHeader(f"DIMENSION must be >= 2, got {self.dimension}")
        if self.problem_type == "ATSP" and (
            self.edge_weight_type != "EXPLICIT"
            or self.edge_weight_format != "FULL_MATRIX"
        ):
            raise MalformedHeader(
                "ATSP requires EDGE_WEIGHT_TYPE EXPLICIT and "
                "EDGE_WEIGHT_FORMAT FULL_MATRIX"
            )


@dataclass(frozen=True)
class AtspInstance:
    """Complete directed cost matrix with metadata.

    ``costs[i, j]`` is the arc cost i -> j; asymmetry (``c_ij != c_ji``) is
    permitted.  Diagonal entries are preserved verbatim for round-trip
    fidelity but are never read by any algorithm (TSPLIB files commonly put
    a sentinel such as 9999999 there).
    """

    header: TsplibHeader
    costs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        costs = np.asarray(self.costs, dtype=np.int64)
        if costs.ndim != 2 or costs.shape[0] != costs.shape[1]:
            raise ValueError(f"cost matrix must be square, got {costs.shape}")
        if costs.shape[0] != self.header.dimension:
            raise ValueError(
                f"cost matrix side {costs.shape[0]} != DIMENSION {self.header.dimension}"
            )
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)

    @property
    def n(self) -> int:
        return self.header.dimension

    @property
    def name(self) -> str:
        return self.header.name

    def cost(self, i: int, j: int) -> int:
        return int(self.costs[i, j])


def make_instance(name: str, costs: np.ndarray | Sequence[Sequence[int]]) -> AtspInstance:
    """Build an in-memory EXPLICIT/FULL_MATRIX instance from a cost matrix."""
    costs = np.asarray(costs, dtype=np.int64)
    header = TsplibHeader(
        name=name,
        problem_type="ATSP",
        dimension=costs.shape[0],
        edge_weight_type="EXPLICIT",
        edge_weight_format="FULL_MATRIX",
    )
    return AtspInstance(header=header, costs=costs)


def tour_cost(instance: AtspInstance, nodes: Sequence[int]) -> int:
    """Closed-cycle cost of visiting ``nodes`` in order under asymmetric arcs.

    Raises DuplicateNode / NodeOutOfRange on invalid input; never reads the
    diagonal because nodes are required to be distinct.
    """
    nodes = tuple(int(v) for v in nodes)
    if len(nodes) < 2:
        raise ValueError(f"a tour needs at least 2 nodes, got {len(nodes)}")
    n = instance.n
    for v in nodes:
        if not 0 <= v < n:
            raise NodeOutOfRange(f"node {v} outside 0..{n - 1}")
    if len(set(nodes)) != len(nodes):
        raise DuplicateNode(f"duplicate node in {nodes}")
    arr = np.asarray(nodes)
    return int(instance.costs[arr, np.roll(arr, -1)].sum())


@dataclass(frozen=True)
class Tour:
    """A Hamiltonian cycle over a node subset, with its closed-cycle cost.

    The cyclic order is stored explicitly; direction matters because costs
    are asymmetric.  The canonical representative (smallest node first) is
    produced by :func:`canonicalize`.
    """

    nodes: tuple[int, ...]
    cost: int

    def __post_init__(self) -> None:
        if len(self.nodes) < 2:
            raise ValueError("a tour needs at least 2 nodes")
        if len(set(self.nodes)) != len(self.nodes):
            raise DuplicateNode(f"duplicate node in {self.nodes}")

    def __len__(self) -> int:
        return len(self.nodes)


def make_tour(instance: AtspInstance, nodes: Sequence[int]) -> Tour:
    """Cost the node sequence and return the canonical (rotated) tour."""
    return canonicalize(Tour(nodes=tuple(int(v) for v in nodes),
                             cost=tour_cost(instance, nodes)))


def canonicalize(tour: Tour) -> Tour:
    """Rotate so the minimum node index leads; direction is preserved.

    Rotation never changes the cyclic cost, so ``cost`` is carried over.
    """
    k = tour.nodes.index(min(tour.nodes))
    if k == 0:
        return tour
    return Tour(nodes=tour.nodes[k:] + tour.nodes[:k], cost=tour.cost)


@dataclass(frozen=True)
class Partition:
    """Label-based cluster assignment: ``labels[v]`` is the cluster of node v."""

    labels: tuple[int, ...]
    k: int

    @property
    def n(self) -> int:
        return len(self.labels)

    def clusters(self) -> list[tuple[int, ...]]:
        """Member node tuples per cluster id, index-aligned with labels 0..k-1."""
        out: list[list[int]] = [[] for _ in range(self.k)]
        for v, lab in enumerate(self.labels):
            out[lab].append(v)
        return [tuple(c) for c in out]

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for lab in self.labels:
            counts[lab] += 1
        return counts


def make_partition(labels: Sequence[int]) -> Partition:
    """Partition from raw labels; k is taken as max label + 1."""
    labels = tuple(int(x) for x in labels)
    return Partition(labels=labels, k=(max(labels) + 1) if labels else 0)


def compact_labels(labels: Sequence[int]) -> Partition:
    """Renumber labels to 0..k-1 in order of first appearance."""
    mapping: dict[int, int] = {}
    out = []
    for lab in labels:
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out.append(mapping[lab])
    return Partition(labels=tuple(out), k=len(mapping))


def validate_partition(partition: Partition, n: int, max_cluster_size: int) -> list[str]:
    """Every violated invariant as a message; an empty list means valid."""
    violations: list[str] = []
    if partition.n != n:
        violations.append(f"label vector length {partition.n} != n {n}")
    if partition.k < 1:
        violations.append("partition has no clusters")
        return violations
    for lab in partition.labels:
        if not 0 <= lab < partition.k:
            violations.append(f"label {lab} outside 0..{partition.k - 1}")
            return violations
    sizes = partition.sizes()
    for cid, size in enumerate(sizes):
        if size == 0:
            violations.append(f"cluster id {cid} unused")
        elif size < 2:
            violations.append(f"cluster {cid} size {size} < 2")
        elif size > max_cluster_size:
            violations.append(f"cluster {cid} size {size} > {max_cluster_size}")
    return violations
