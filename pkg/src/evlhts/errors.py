"""Exception taxonomy shared across the package.

Every error raised on a contract violation derives from EvlhtsError so that
callers (and the CLI runner) can separate usage errors from genuine bugs.
"""


class EvlhtsError(Exception):
    """Base class for all package-level errors."""


class BackendUnsupported(EvlhtsError):
    """Requested point backend is not available for this map."""


class DomainError(EvlhtsError):
    """A point left the valid domain, or an argument is out of domain."""


class UnsupportedCombination(EvlhtsError):
    """A (map, measure) or (map, target) pairing has no defined semantics."""


class NotAttained(EvlhtsError):
    """quantile_radius hit a flat spot: no radius attains the requested mass."""


class OutOfRange(EvlhtsError):
    """Argument outside the domain/range of a shape function."""


class ZeroMassCylinder(EvlhtsError):
    """A cylinder carries zero mass, so its log-mass is undefined."""


class EmptyBlock(EvlhtsError):
    """Maximum of an empty observation block requested."""


class UnsupportedY(EvlhtsError):
    """Normalizing level requested outside the support of the limit type."""


class DegenerateTail(EvlhtsError):
    """The tail quantile jumped past the requested level (atomic tail)."""


class CapTooSmall(EvlhtsError):
    """Requested normalized time exceeds the censoring cap of the simulation."""


class NonMonotoneInput(EvlhtsError):
    """Grid input that must be a distribution function is not monotone."""


class InsufficientSample(EvlhtsError):
    """Too few observations for the requested statistic."""


class GridMismatch(EvlhtsError):
    """Evaluation grid falls outside the hull of the data grid."""


class ConfigError(EvlhtsError):
    """Invalid, unknown, or inconsistent configuration input."""


class ToleranceFail(EvlhtsError):
    """An experiment ran to completion but a declared tolerance band failed.

    The report and output files are still written; this error only marks
    the verdict for exit-code purposes.
    """
