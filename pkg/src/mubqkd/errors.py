"""Exception hierarchy.

Everything raised on purpose by this package derives from :class:`MubqkdError`.
The CLI maps :class:`ConfigError` to exit code 2 and every other subclass to
exit code 3.
"""


class MubqkdError(Exception):
    """Base class for all package errors."""


class ConfigError(MubqkdError, ValueError):
    """Malformed or inconsistent run configuration."""


class ModelError(MubqkdError):
    """Numeric or physical-model failure."""


class InvalidStateError(ModelError, ValueError):
    """A vector or matrix violates the invariants of a quantum state."""


class DegenerateStateError(ModelError):
    """The top eigenvalue of a density matrix is not separated from the next."""


class DegenerateConditionalError(ModelError):
    """Conditioning on Alice's outcome leaves (almost) nothing of Bob's state."""


class WeakEntanglementError(ModelError):
    """Concurrence too low to derive meaningful corrected bases."""


class WaveplateSolveError(ModelError):
    """No waveplate pair reproduces the target projection."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (best residual {residual:.3e})")
        self.residual = residual


class InfeasibleTargetError(ModelError, ValueError):
    """Requested (fidelity, concurrence) pair is outside the source noise family."""


class InsufficientDataError(ModelError):
    """Not enough counts to reconstruct a state."""


class NoPeakError(ModelError):
    """Cross-correlation histogram has no significant coincidence peak."""


class UndefinedQBERError(ModelError, ZeroDivisionError):
    """QBER requested for a table with no sifted coincidences."""


class StreamFormatError(ModelError, ValueError):
    """Timestamp or tomography file is malformed."""


class TomographyResidualWarning(UserWarning):
    """Linear inversion produced a noticeably unphysical estimate."""


class WeakEntanglementWarning(UserWarning):
    """Concurrence is low enough that corrected bases are of doubtful quality."""
