"""Node partition production and evolution.

Clustering quality is judged on a symmetrized view of the asymmetric costs:
distances d_ij = (c_ij + c_ji) / 2 and similarities w_ij = c_max - d_ij.
The validity indices are defined on symmetric structures and the costs are
not, so this symmetrization is applied before any clustering; see README.
Calinski-Harabasz and Davies-Bouldin are computed over a classical
multidimensional-scaling embedding of the distance matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateMetric, InfeasibleConstraints, NoLegalMove
from .model import AtspInstance, Partition, compact_labels, validate_partition

EMBEDDING_DIMS = 8
DEFAULT_VNS_BUDGET = 200


@dataclass(frozen=True)
class ClusterMetric:
    """A clustering validity index together with its optimization direction."""

    kind: str

    @property
    def maximize(self) -> bool:
        return self.kind != "davies_bouldin"

    def better(self, a: float, b: float) -> bool:
        """True when score a beats score b under this metric."""
        return a > b if self.maximize else a < b


CALINSKI_HARABASZ = ClusterMetric("calinski_harabasz")
DAVIES_BOULDIN = ClusterMetric("davies_bouldin")
MODULARITY = ClusterMetric("modularity")
ALL_METRICS = (CALINSKI_HARABASZ, DAVIES_BOULDIN, MODULARITY)


@dataclass(frozen=True)
class SimilarityView:
    """Symmetric distance/similarity matrices derived from an instance."""

    distance: np.ndarray = field(repr=False)
    similarity: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.distance.shape[0]

    @cached_property
    def embedding(self) -> np.ndarray:
        """Classical MDS coordinates, min(n - 1, 8) dimensions."""
        n = self.n
        d2 = self.distance ** 2
        j = np.eye(n) - np.full((n, n), 1.0 / n)
        b = -0.5 * j @ d2 @ j
        vals, vecs = np.linalg.eigh(b)
        order = np.argsort(vals)[::-1]
        dims = min(n - 1, EMBEDDING_DIMS)
        coords = np.zeros((n, dims))
        col = 0
        for idx in order[:dims]:
            if vals[idx] <= 1e-9:
                break
            coords[:, col] = vecs[:, idx] * np.sqrt(vals[idx])
            col += 1
        coords.setflags(write=False)
        return coords

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = self.similarity.sum(axis=1)
        deg.setflags(write=False)
        return deg

    @cached_property
    def total_weight(self) -> float:
        """Total edge weight of the similarity graph (each edge once)."""
        return float(self.similarity.sum()) / 2.0


def similarity_view(instance: AtspInstance) -> SimilarityView:
    c = instance.costs.astype(np.float64)
    d = (c + c.T) / 2.0
    np.fill_diagonal(d, 0.0)
    off = ~np.eye(instance.n, dtype=bool)
    c_max = float(c[off].max())
    w = np.where(off, c_max - d, 0.0)
    d.setflags(write=False)
    w.setflags(write=False)
    return SimilarityView(distance=d, similarity=w)


# --- metric evaluation --------------------------------------------------------

def _cluster_sums(x: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    return np.column_stack([
        np.bincount(labels, weights=x[:, d], minlength=k)
        for d in range(x.shape[1])
    ])


def _ch_score(x: np.ndarray, labels: np.ndarray, k: int) -> float:
    n = x.shape[0]
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    centroids = _cluster_sums(x, labels, k) / counts[:, None]
    grand = x.mean(axis=0)
    between = float((counts * ((centroids - grand) ** 2).sum(axis=1)).sum())
    within = float(((x - centroids[labels]) ** 2).sum())
    if within <= 1e-12:
        return np.inf
    return (between / (k - 1)) / (within / (n - k))


def _db_score(x: np.ndarray, labels: np.ndarray, k: int) -> float:
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    centroids = _cluster_sums(x, labels, k) / counts[:, None]
    spread = np.linalg.norm(x - centroids[labels], axis=1)
    sigma = np.bincount(labels, weights=spread, minlength=k) / counts
    dist = np.linalg.norm(centroids[:, None, :] - centroids[None, :, :], axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (sigma[:, None] + sigma[None, :]) / dist
    np.fill_diagonal(ratio, -np.inf)
    return float(np.max(ratio, axis=1).mean())


def _modularity_score(view: SimilarityView, labels: np.ndarray, k: int) -> float:
    m = view.total_weight
    if m <= 0.0:
        return 0.0
    onehot = np.zeros((labels.shape[0], k))
    onehot[np.arange(labels.shape[0]), labels] = 1.0
    w_in = np.einsum("ic,ij,jc->c", onehot, view.similarity, onehot) / 2.0
    deg_c = view.degrees @ onehot
    return float((w_in / m - (deg_c / (2.0 * m)) ** 2).sum())


def score_partition(
    view: SimilarityView, partition: Partition, metric: ClusterMetric
) -> float:
    """Standard index value of the partition under the chosen metric."""
    labels = np.asarray(partition.labels)
    k = partition.k
    if metric.kind == "modularity":
        return _modularity_score(view, labels, k)
    if k < 2:
        raise DegenerateMetric(f"{metric.kind} undefined for k={k}")
    if metric.kind == "calinski_harabasz":
        return _ch_score(view.embedding, labels, k)
    if metric.kind == "davies_bouldin":
        return _db_score(view.embedding, labels, k)
    raise ValueError(f"unknown metric {metric.kind!r}")


# --- partition generation -----------------------------------------------------

def _check_feasible(n: int, max_cluster_size: int) -> None:
    if n < 2:
        raise InfeasibleConstraints(f"n={n} < 2")
    if max_cluster_size < 2:
        raise InfeasibleConstraints(f"max_cluster_size={max_cluster_size} < 2")
    if max_cluster_size == 2 and n % 2 == 1:
        raise InfeasibleConstraints(
            f"n={n} odd cannot be split into clusters of exactly 2"
        )


def random_feasible_partition(n: int, max_cluster_size: int, seed: int) -> Partition:
    """Shuffle nodes, then cut into consecutive chunks of random legal sizes."""
    _check_feasible(n, max_cluster_size)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    sizes: list[int] = []
    rem = n
    while rem > 0:
        if rem <= max_cluster_size:
            sizes.append(rem)
            break
        hi = min(max_cluster_size, rem - 2)
        sizes.append(int(rng.integers(2, hi + 1)))
        rem -= sizes[-1]
    labels = np.empty(n, dtype=np.int64)
    pos = 0
    for cid, size in enumerate(sizes):
        labels[order[pos:pos + size]] = cid
        pos += size
    return Partition(labels=tuple(int(x) for x in labels), k=len(sizes))


def _legal_moves(labels: list[int], sizes: list[int], k: int,
                 max_cluster_size: int) -> list[tuple[int, int]]:
    """All (node, target-cluster) insertions that keep the partition valid.

    Moving the last-but-one node out of a 2-cluster drags its partner along
    (pair insertion), so the target must then absorb two nodes.
    """
    moves = []
    for v, src in enumerate(labels):
        gain = 2 if sizes[src] == 2 else 1
        for t in range(k):
            if t != src and sizes[t] + gain <= max_cluster_size:
                moves.append((v, t))
    return moves


def _apply_move(partition: Partition, node: int, target: int) -> Partition:
    labels = list(partition.labels)
    src = labels[node]
    sizes = partition.sizes()
    if sizes[src] == 2:
        for v, lab in enumerate(labels):
            if lab == src:
                labels[v] = target
        return compact_labels(labels)
    labels[node] = target
    return Partition(labels=tuple(labels), k=partition.k)


def insertion_perturb(
    partition: Partition, max_cluster_size: int, seed: int
) -> Partition:
    """Move one random node (or 2-cluster pair) to a random other cluster."""
    rng = np.random.default_rng(seed)
    labels = list(partition.labels)
    sizes = partition.sizes()
    moves = _legal_moves(labels, sizes, partition.k, max_cluster_size)
    if not moves:
        raise NoLegalMove("no insertion keeps the partition valid")
    movable = sorted({v for v, _ in moves})
    node = movable[int(rng.integers(len(movable)))]
    targets = [t for v, t in moves if v == node]
    target = targets[int(rng.integers(len(targets)))]
    return _apply_move(partition, node, target)


# --- multiform VNS initializer -------------------------------------------------

def _local_search_step(
    view: SimilarityView,
    partition: Partition,
    metric: ClusterMetric,
    score: float,
    max_cluster_size: int,
) -> tuple[Partition, float]:
    """Apply the best improving single insertion, if any."""
    labels = list(partition.labels)
    moves = _legal_moves(labels, partition.sizes(), partition.k, max_cluster_size)
    best_p, best_s = partition, score
    for node, target in moves:
        cand = _apply_move(partition, node, target)
        if cand.k < 2:
            continue
        cand_s = score_partition(view, cand, metric)
        if metric.better(cand_s, best_s):
            best_p, best_s = cand, cand_s
    return best_p, best_s


def _shake(partition: Partition, k_moves: int, max_cluster_size: int,
           rng: np.random.Generator) -> Partition:
    out = partition
    for _ in range(k_moves):
        try:
            out = insertion_perturb(out, max_cluster_size,
                                    int(rng.integers(1 << 62)))
        except NoLegalMove:
            break
        if out.k < 2:
            break
    return out


def multiform_vns_init(
    instance: AtspInstance,
    max_cluster_size: int,
    budget: int = DEFAULT_VNS_BUDGET,
    seed: int = 0,
) -> dict[str, Partition]:
    """Best partition found per metric by three coevolving VNS subpopulations.

    Each subpopulation optimizes one metric; every budget/5 iterations the
    incumbents migrate round-robin and are adopted when they score better
    under the receiving metric.  When the whole instance fits in one cluster
    no decomposition is needed and the single-cluster partition is returned
    for every metric.
    """
    n = instance.n
    if n <= max_cluster_size:
        # decomposition unnecessary: the whole instance is one cluster
        single = Partition(labels=(0,) * n, k=1)
        return {m.kind: single for m in ALL_METRICS}
    if n < 4:
        raise InfeasibleConstraints(f"initializer needs n >= 4, got {n}")
    _check_feasible(n, max_cluster_size)

    view = similarity_view(instance)
    rng = np.random.default_rng(seed)
    incumbents: list[Partition] = []
    scores: list[float] = []
    for _ in ALL_METRICS:
        incumbents.append(
            random_feasible_partition(n, max_cluster_size,
                                      int(rng.integers(1 << 62)))
        )
    for metric, part in zip(ALL_METRICS, incumbents):
        scores.append(score_partition(view, part, metric))

    shakes = [1, 1, 1]
    migrate_every = max(1, budget // 5)
    for it in range(budget):
        for s, metric in enumerate(ALL_METRICS):
            cand = _shake(incumbents[s], shakes[s], max_cluster_size, rng)
            if cand.k < 2:
                cand = incumbents[s]
            cand_score = score_partition(view, cand, metric)
            cand, cand_score = _local_search_step(
                view, cand, metric, cand_score, max_cluster_size
            )
            if metric.better(cand_score, scores[s]):
                incumbents[s], scores[s] = cand, cand_score
                shakes[s] = 1
            else:
                shakes[s] = shakes[s] % 3 + 1
        if (it + 1) % migrate_every == 0:
            migrants = [incumbents[(s + 1) % len(ALL_METRICS)]
                        for s in range(len(ALL_METRICS))]
            for s, metric in enumerate(ALL_METRICS):
                if migrants[s].k < 2:
                    continue
                mig_score = score_partition(view, migrants[s], metric)
                if metric.better(mig_score, scores[s]):
                    incumbents[s], scores[s] = migrants[s], mig_score

    out: dict[str, Partition] = {}
    for metric, part in zip(ALL_METRICS, incumbents):
        assert not validate_partition(part, n, max_cluster_size)
        out[metric.kind] = part
    return out
