"""Tour-assignment QUBO construction, decoding, and Ising conversion.

A cluster of m nodes is encoded with m*m binary variables x[v, p] meaning
"node v sits at cyclic position p".  On feasible assignments (each node in
exactly one position, each position holding exactly one node) the energy
plus the recorded offset equals the closed sub-tour cost; any constraint
violation costs strictly more than every feasible assignment when the
default penalty weight is used.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ClusterTooLarge, ClusterTooSmall, LengthMismatch
from .model import AtspInstance, Tour, canonicalize

Bits = Sequence[int] | str


def _as_bit_array(assignment: Bits, n_vars: int) -> np.ndarray:
    if isinstance(assignment, str):
        bits = np.frombuffer(assignment.encode(), dtype=np.uint8) - ord("0")
    else:
        bits = np.asarray(assignment, dtype=np.uint8)
    if bits.shape != (n_vars,) or not np.isin(bits, (0, 1)).all():
        raise LengthMismatch(
            f"assignment must be {n_vars} bits, got {assignment!r}"
        )
    return bits


@dataclass(frozen=True)
class QuboMatrix:
    """Upper-triangular quadratic coefficient table with variable bookkeeping.

    ``coefficients`` maps (i, j) with i <= j to the coefficient; diagonal
    entries are the linear biases.  ``offset`` carries the constant produced
    by expanding the squared constraint terms, so the matrix itself has no
    constant term.  ``var_index`` maps variable k to its (node, position)
    pair; it is None for generic QUBOs that do not encode a tour.
    """

    n_vars: int
    coefficients: dict[tuple[int, int], float] = field(repr=False)
    offset: float = 0.0
    penalty_a: float = 0.0
    var_index: tuple[tuple[int, int], ...] | None = None
    cluster_nodes: tuple[int, ...] | None = None
    cluster_costs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        for i, j in self.coefficients:
            if i > j:
                raise ValueError(f"lower-triangular entry ({i}, {j})")
            if not 0 <= i <= j < self.n_vars:
                raise ValueError(f"entry ({i}, {j}) outside 0..{self.n_vars - 1}")

    @property
    def m(self) -> int:
        """Cluster size for tour QUBOs (n_vars = m*m)."""
        m = int(round(self.n_vars ** 0.5))
        return m

    def var_of(self, node: int, position: int) -> int:
        assert self.cluster_nodes is not None
        return self.cluster_nodes.index(node) * self.m + position

    @cached_property
    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """(linear, couplers) as float64 arrays; couplers symmetrized."""
        h = np.zeros(self.n_vars)
        w = np.zeros((self.n_vars, self.n_vars))
        for (i, j), coeff in self.coefficients.items():
            if i == j:
                h[i] = coeff
            else:
                w[i, j] = w[j, i] = coeff
        h.setflags(write=False)
        w.setflags(write=False)
        return h, w

    def energy(self, assignment: Bits) -> float:
        """QUBO energy of one assignment (offset NOT included)."""
        bits = _as_bit_array(assignment, self.n_vars).astype(np.float64)
        h, w = self.dense
        return float(bits @ h + 0.5 * bits @ w @ bits)

    def energies(self, batch: np.ndarray) -> np.ndarray:
        """Energies of a (B, n_vars) 0/1 matrix, vectorized."""
        b = np.asarray(batch, dtype=np.float64)
        h, w = self.dense
        return b @ h + 0.5 * np.einsum("bi,ij,bj->b", b, w, b)


def default_penalty(instance: AtspInstance, cluster: Iterable[int]) -> float:
    """Constraint weight m*c_max + 1 over the cluster's off-diagonal costs.

    Any single constraint violation then costs more than any achievable
    tour-cost difference within the cluster.
    """
    nodes = sorted(int(v) for v in cluster)
    m = len(nodes)
    sub = instance.costs[np.ix_(nodes, nodes)]
    off_diag = sub[~np.eye(m, dtype=bool)]
    c_max = int(off_diag.max()) if off_diag.size else 0
    return float(m * c_max + 1)


def build_atsp_qubo(
    instance: AtspInstance,
    cluster: Iterable[int],
    penalty_a: float | None = None,
    max_cluster_size: int | None = None,
) -> QuboMatrix:
    """QUBO over m*m position variables whose feasible energies are tour costs.

    Objective couplers carry the arc costs between consecutive cyclic
    positions; the one-node-per-position and one-position-per-node
    constraints are folded in with weight ``penalty_a`` (default:
    :func:`default_penalty`).  The constant from expanding the squared
    constraints is recorded in ``offset``.
    """
    nodes = tuple(sorted(int(v) for v in cluster))
    m = len(nodes)
    if len(set(nodes)) != m:
        raise ValueError(f"duplicate nodes in cluster {nodes}")
    if m < 2:
        raise ClusterTooSmall(f"cluster size {m} < 2")
    if max_cluster_size is not None and m > max_cluster_size:
        raise ClusterTooLarge(f"cluster size {m} > {max_cluster_size}")
    if penalty_a is None:
        penalty_a = default_penalty(instance, nodes)

    coeffs: dict[tuple[int, int], float] = {}

    def add(i: int, j: int, val: float) -> None:
        key = (i, j) if i <= j else (j, i)
        coeffs[key] = coeffs.get(key, 0.0) + val

    def var(v_local: int, p: int) -> int:
        return v_local * m + p

    # arc costs between consecutive cyclic positions
    sub = instance.costs[np.ix_(nodes, nodes)]
    for u in range(m):
        for w in range(m):
            if u == w:
                continue
            c = float(sub[u, w])
            for p in range(m):
                add(var(u, p), var(w, (p + 1) % m), c)

    # each node in exactly one position / each position holds exactly one node
    offset = 2.0 * penalty_a * m
    for v in range(m):
        for p in range(m):
            add(var(v, p), var(v, p), -2.0 * penalty_a)
        for p in range(m):
            for q in range(p + 1, m):
                add(var(v, p), var(v, q), 2.0 * penalty_a)
    for p in range(m):
        for v in range(m):
            for u in range(v + 1, m):
                add(var(v, p), var(u, p), 2.0 * penalty_a)

    coeffs = {k: v for k, v in coeffs.items() if v != 0.0}
    var_index = tuple((nodes[k // m], k % m) for k in range(m * m))
    return QuboMatrix(
        n_vars=m * m,
        coefficients=coeffs,
        offset=offset,
        penalty_a=penalty_a,
        var_index=var_index,
        cluster_nodes=nodes,
        cluster_costs=sub,
    )


@dataclass(frozen=True)
class InfeasibilityReport:
    """Which assignment constraints are violated, by node and by position."""

    bad_nodes: tuple[tuple[int, int], ...]      # (node, positions occupied)
    bad_positions: tuple[tuple[int, int], ...]  # (position, nodes assigned)

    @property
    def feasible(self) -> bool:
        return False


def decode(qubo: QuboMatrix, assignment: Bits) -> Tour | InfeasibilityReport:
    """Translate a sampler bitstring back into a sub-tour.

    Feasible permutation-matrix assignments give the canonicalized Tour with
    its exact arc-sum cost; anything else gives an InfeasibilityReport naming
    every violated row/column constraint.
    """
    if qubo.var_index is None or qubo.cluster_nodes is None:
        raise ValueError("this QUBO does not carry tour variable bookkeeping")
    bits = _as_bit_array(assignment, qubo.n_vars)
    m = qubo.m
    grid = bits.reshape(m, m)  # rows: local node index, cols: position
    row_sums = grid.sum(axis=1)
    col_sums = grid.sum(axis=0)
    if (row_sums == 1).all() and (col_sums == 1).all():
        local_order = [0] * m
        for v_local in range(m):
            p = int(np.argmax(grid[v_local]))
            local_order[p] = v_local
        cost = int(sum(
            qubo.cluster_costs[local_order[p], local_order[(p + 1) % m]]
            for p in range(m)
        ))
        nodes = tuple(qubo.cluster_nodes[v] for v in local_order)
        return canonicalize(Tour(nodes=nodes, cost=cost))
    bad_nodes = tuple(
        (qubo.cluster_nodes[v], int(row_sums[v]))
        for v in range(m)
        if row_sums[v] != 1
    )
    bad_positions = tuple(
        (p, int(col_sums[p])) for p in range(m) if col_sums[p] != 1
    )
    return InfeasibilityReport(bad_nodes=bad_nodes, bad_positions=bad_positions)


def encode_tour(qubo: QuboMatrix, nodes: Sequence[int]) -> str:
    """Place permutation-matrix bits for a tour over the cluster's nodes."""
    if qubo.cluster_nodes is None:
        raise ValueError("this QUBO does not carry tour variable bookkeeping")
    if sorted(nodes) != list(qubo.cluster_nodes):
        raise ValueError(f"{nodes} does not cover cluster {qubo.cluster_nodes}")
    bits = ["0"] * qubo.n_vars
    for p, v in enumerate(nodes):
        bits[qubo.var_of(int(v), p)] = "1"
    return "".join(bits)


@dataclass(frozen=True)
class IsingModel:
    """Spin (+/-1) formulation equivalent to a QUBO under 0 -> -1, 1 -> +1."""

    linear: dict[int, float]
    quadratic: dict[tuple[int, int], float]
    offset: float

    def energy(self, spins: Sequence[int]) -> float:
        e = self.offset
        for i, h in self.linear.items():
            e += h * spins[i]
        for (i, j), jj in self.quadratic.items():
            e += jj * spins[i] * spins[j]
        return e


def qubo_to_ising(qubo: QuboMatrix) -> IsingModel:
    """Change of variables z = (1 + s) / 2; energies match for every state."""
    linear: dict[int, float] = {}
    quadratic: dict[tuple[int, int], float] = {}
    offset = 0.0
    for (i, j), q in qubo.coefficients.items():
        if i == j:
            linear[i] = linear.get(i, 0.0) + q / 2.0
            offset += q / 2.0
        else:
            quadratic[(i, j)] = quadratic.get((i, j), 0.0) + q / 4.0
            linear[i] = linear.get(i, 0.0) + q / 4.0
            linear[j] = linear.get(j, 0.0) + q / 4.0
            offset += q / 4.0
    linear = {i: h for i, h in linear.items() if h != 0.0}
    quadratic = {k: v for k, v in quadratic.items() if v != 0.0}
    return IsingModel(linear=linear, quadratic=quadratic, offset=offset)


# --- plain-text sparse interchange format ------------------------------------

def qubo_to_text(qubo: QuboMatrix) -> str:
    """One line per nonzero entry ``i j coeff`` with a small comment header."""
    lines = [f"# n_vars {qubo.n_vars}", f"# offset {qubo.offset!r}"]
    if qubo.penalty_a:
        lines.append(f"# penalty_a {qubo.penalty_a!r}")
    for (i, j) in sorted(qubo.coefficients):
        lines.append(f"{i} {j} {qubo.coefficients[(i, j)]!r}")
    return "\n".join(lines) + "\n"


def qubo_from_text(text: str) -> QuboMatrix:
    """Parse the sparse text format back into a (generic) QuboMatrix."""
    n_vars: int | None = None
    offset = 0.0
    penalty_a = 0.0
    coeffs: dict[tuple[int, int], float] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "n_vars":
                n_vars = int(parts[1])
            elif len(parts) == 2 and parts[0] == "offset":
                offset = float(parts[1])
            elif len(parts) == 2 and parts[0] == "penalty_a":
                penalty_a = float(parts[1])
            continue
        i_s, j_s, c_s = line.split()
        coeffs[(int(i_s), int(j_s))] = float(c_s)
    if n_vars is None:
        raise ValueError("missing '# n_vars' header line")
    return QuboMatrix(
        n_vars=n_vars, coefficients=coeffs, offset=offset, penalty_a=penalty_a
    )


def qubo_from_entries(
    n_vars: int,
    entries: Iterable[tuple[int, int, float]],
    offset: float = 0.0,
) -> QuboMatrix:
    """Generic QUBO from (i, j, coeff) triples (i <= j enforced by sorting)."""
    coeffs: dict[tuple[int, int], float] = {}
    for i, j, c in entries:
        key = (i, j) if i <= j else (j, i)
        coeffs[key] = coeffs.get(key, 0.0) + float(c)
    coeffs = {k: v for k, v in coeffs.items() if v != 0.0}
    return QuboMatrix(n_vars=n_vars, coefficients=coeffs, offset=offset)
