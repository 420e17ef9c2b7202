"""Exception and warning types shared across the package."""


class GenselectError(ValueError):
    """Base class for domain errors."""


class NoExploitableDiversityError(GenselectError):
    """Team oracle equals team mean; selector quality is undefined."""


class DiversityDominatedError(GenselectError):
    """The best homogeneous mean does not exceed the diverse team's mean."""


class NoOracleAdvantageError(GenselectError):
    """The diverse team's oracle does not exceed the best homogeneous mean."""


class SeparationError(GenselectError):
    """Agent and judge pools overlap."""


class DegenerateVarianceError(GenselectError):
    """A variance required as a denominator is zero."""


class RankDeficiencyError(GenselectError):
    """The regression design matrix is rank deficient."""


class ArtifactError(GenselectError):
    """A persisted experiment artifact is missing, corrupt, or incompatible."""


class ConfigError(GenselectError):
    """An experiment configuration file is missing, malformed, or inconsistent."""


class SelectorQualityWarning(UserWarning):
    """Estimated selector quality fell outside the plausible [-0.25, 1.25] band."""


class DegenerateAgreementWarning(UserWarning):
    """Cohen's kappa denominator degenerate; flagged fallback value returned."""
