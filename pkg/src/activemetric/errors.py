"""Exception and warning types shared across the package."""


class ContradictionError(ValueError):
    """An oracle answer conflicts with the transitive closure of known constraints."""


class DimensionError(ValueError):
    """Array shapes or index ranges do not line up."""


class InsufficientConstraints(ValueError):
    """Too few labeled pairs for the requested cross-validation split."""


class DegenerateProblem(ValueError):
    """Metric learning input admits no informative solution (all differences zero)."""


class EmptyHistory(ValueError):
    """Aggregation over an empty metric history was requested."""


class DegenerateClustering(ValueError):
    """Clustering quality index undefined (empty cluster or zero within-scatter)."""


class LengthMismatch(ValueError):
    """Two label sequences being compared have different lengths."""


class BudgetExhausted(RuntimeError):
    """The query budget ran out; partial progress is retained on the session."""


class NoCandidates(RuntimeError):
    """Every instance already belongs to a neighborhood; nothing left to query."""


class ParseError(ValueError):
    """A data file could not be parsed; the message names the offending row."""


class IoError(OSError):
    """Reading or writing a data file failed at the filesystem level."""


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped at its iteration cap before meeting tolerance."""


class SingleNeighborhood(UserWarning):
    """Only one neighborhood exists, so membership is certain by construction."""


class EmptyClusterWarning(UserWarning):
    """A cluster lost all members during assignment and was re-seeded."""
