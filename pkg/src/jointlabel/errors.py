"""Exception hierarchy shared across the package."""


class JointLabelError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatchError(JointLabelError):
    """Operands fed to a graph op have incompatible shapes."""


class NonFiniteError(JointLabelError):
    """An op produced NaN or Inf."""


class ContractError(JointLabelError):
    """A caller violated an operation's contract (e.g. non-scalar loss)."""


class ParseError(JointLabelError):
    """Malformed dataset or embedding file; message carries the line number."""


class ValidationError(JointLabelError):
    """Structurally valid input that violates a dataset invariant."""


class ConfigError(JointLabelError):
    """Invalid or incomplete run configuration."""


class CheckpointError(JointLabelError):
    """Unreadable or inconsistent checkpoint file."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an incompatible format version."""


class CheckpointIntegrityError(CheckpointError):
    """Checkpoint is truncated or corrupted."""


class TrainingDivergedError(JointLabelError):
    """Training produced a non-finite loss or gradient."""
