"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation failures exit 1,
I/O and ingestion failures exit 2, anything else exits 3.
"""


class QrcvolError(Exception):
    """Base class for all package errors."""


class InputShapeError(QrcvolError):
    """An array or window has the wrong length/shape."""


class ResourceError(QrcvolError):
    """Request exceeds a hard resource guard (e.g. too many qubits)."""


class StateError(QrcvolError):
    """A statevector violates its invariants (e.g. not normalized)."""


class IngestionError(QrcvolError):
    """CSV input is unreadable, malformed or empty."""


class InsufficientDataError(QrcvolError):
    """A series is too short for the requested operation."""


class ConfigError(QrcvolError):
    """Invalid configuration (embedding, grid, regime spec, ...)."""


class EvaluationError(QrcvolError):
    """Metric evaluation received unusable input."""
