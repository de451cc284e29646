"""Exception hierarchy shared across the package."""


class QtabuError(Exception):
    """Base class for all package-specific errors."""


# --- TSPLIB parsing ---------------------------------------------------------

class MalformedHeader(QtabuError):
    """Missing, duplicate, or mutually inconsistent header keyword."""


class DimensionMismatch(QtabuError):
    """Data section size disagrees with the DIMENSION header."""


class UnsupportedFormat(QtabuError):
    """Edge weight type/format or section outside the supported set."""


class TruncatedData(QtabuError):
    """Stream ended in the middle of a data section."""


# --- model ------------------------------------------------------------------

class DuplicateNode(QtabuError):
    """A node appears more than once in a tour."""


class NodeOutOfRange(QtabuError):
    """A node index is outside 0..N-1."""


# --- QUBO construction ------------------------------------------------------

class ClusterTooSmall(QtabuError):
    """Cluster below the 2-node minimum."""


class ClusterTooLarge(QtabuError):
    """Cluster above the configured maximum."""


class LengthMismatch(QtabuError):
    """Assignment length does not match the variable count."""


# --- backends ---------------------------------------------------------------

class SetTooLarge(QtabuError):
    """Node set too large for the exact/exhaustive solver."""


class BackendError(QtabuError):
    """Base class for backend call failures (no budget is consumed)."""


class ConnectionFailed(BackendError):
    """Remote endpoint unreachable or timed out."""


class AuthRejected(BackendError):
    """Remote endpoint rejected the auth token."""


class MalformedResponse(BackendError):
    """Remote endpoint returned an unparseable or invalid body."""


# --- partitioning -----------------------------------------------------------

class DegenerateMetric(QtabuError):
    """Metric undefined for the given partition (e.g. a single cluster)."""


class InfeasibleConstraints(QtabuError):
    """No valid partition exists under the size constraints."""


class NoLegalMove(QtabuError):
    """The insertion perturbation has no legal move to make."""


# --- engine -----------------------------------------------------------------

class BudgetExhausted(QtabuError):
    """A cache miss occurred with no backend calls left."""


class CoverageError(QtabuError):
    """Subsolutions do not form a disjoint cover of all nodes."""
