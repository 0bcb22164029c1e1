"""Exception types shared across the package.

Every error raised deliberately by this package derives from MvggmError so
callers (and the CLI) can distinguish usage problems from genuine bugs.
"""


class MvggmError(Exception):
    """Base class for all package-specific errors."""


class MalformedManifest(MvggmError):
    """Dataset manifest is missing, unparseable, or structurally invalid."""


class ShapeMismatch(MvggmError):
    """Array or file payload does not match the declared dimensions."""


class NonFiniteValue(MvggmError):
    """NaN or infinity encountered where finite data is required."""


class IoFailure(MvggmError):
    """Filesystem read or write failed."""


class DegenerateMask(MvggmError):
    """Support mask cannot yield a positive definite matrix within sane bounds."""


class NotSPD(MvggmError):
    """Matrix expected to be symmetric positive definite is not."""


class ZeroVarianceColumn(MvggmError):
    """A design column has (numerically) zero norm and cannot be standardized."""


class NonPositiveDiagonal(MvggmError):
    """An estimated variance that must be positive came out non-positive."""


class SingularGram(MvggmError):
    """Gram matrix is singular beyond what the ridge fallback can absorb."""


class SvdFailure(MvggmError):
    """SVD failed to converge."""


class NotPSD(MvggmError):
    """Matrix expected to be positive semidefinite is not."""


class BadAlpha(MvggmError):
    """Significance level outside (0, 1), or bootstrap size too small."""


class EmptyEdgeSet(MvggmError):
    """An edge set with at least one edge is required."""


class NegativeC(MvggmError):
    """The magnitude-level threshold c must be nonnegative."""


class ZeroVariance(MvggmError):
    """An edgewise asymptotic variance is zero; the z-statistic is undefined."""


class ConfigError(MvggmError):
    """Invalid configuration value or unknown configuration key."""
