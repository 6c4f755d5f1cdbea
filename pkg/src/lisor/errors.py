"""Exception hierarchy shared across the package."""


class LisorError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(LisorError):
    """Bad task name, option combination, or config file."""


class ShapeError(LisorError):
    """Array dimensions inconsistent with the model or operation."""


class InputError(LisorError):
    """Token or state index outside the valid range."""


class NumericalError(LisorError):
    """Non-finite value surfaced during a numeric computation."""


class TrainingError(LisorError):
    """Training diverged or could not proceed."""


class ClusteringError(LisorError):
    """Clustering preconditions violated (e.g. k exceeds distinct points)."""


class StructuralError(LisorError):
    """Pool, clustering, or automaton structures disagree."""


class ParseError(LisorError):
    """A serialized artifact failed validation while loading."""
