"""Decomposition-based ATSP solver with cached cluster solutions and
pluggable QUBO annealing backends."""

from .anneal import AnnealSchedule
from .backends import (
    BackendRequest,
    BackendResponse,
    ExactBackend,
    RemoteBackend,
    SimulatedAnnealingBackend,
    sample_simulated_annealing,
    solve_exact_heldkarp,
    solve_exhaustive,
    solve_remote,
)
from .engine import (
    Bridge,
    Budget,
    QtaConfig,
    SubSolution,
    TabuDictionary,
    best_bridge,
    greedy_merge,
    run_qta,
    solve_cluster_cached,
)
from .model import (
    AtspInstance,
    Partition,
    Tour,
    TsplibHeader,
    canonicalize,
    make_instance,
    make_partition,
    make_tour,
    tour_cost,
    validate_partition,
)
from .partitioning import (
    ALL_METRICS,
    CALINSKI_HARABASZ,
    DAVIES_BOULDIN,
    MODULARITY,
    ClusterMetric,
    SimilarityView,
    insertion_perturb,
    multiform_vns_init,
    random_feasible_partition,
    score_partition,
    similarity_view,
)
from .qbsolv_like import QbsolvResult, solve_qbsolv_like
from .qubo import (
    InfeasibilityReport,
    IsingModel,
    QuboMatrix,
    build_atsp_qubo,
    decode,
    default_penalty,
    encode_tour,
    qubo_from_entries,
    qubo_from_text,
    qubo_to_ising,
    qubo_to_text,
)
from .report import BenchRow, BenchSummary, RunReport, aggregate_reports
from .server import LoopbackAnnealerServer
from .tsplib import load_instance, parse_instance, save_instance, write_instance

__version__ = "0.1.0"
