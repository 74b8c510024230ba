"""Exception hierarchy for gaussmult."""


class GaussMultError(ValueError):
    """Base class for all errors raised by gaussmult."""


class InvalidCovarianceMatrix(GaussMultError):
    """Matrix is not symmetric, not positive definite, or violates the uncertainty relation."""


class NotSymplectic(GaussMultError):
    """Matrix fails S^T sigma S = sigma."""


class InvalidChannel(GaussMultError):
    """Channel matrices have wrong shapes or violate complete positivity."""


class DegenerateSpectrumError(GaussMultError):
    """First-order perturbation requested at a degenerate symplectic spectrum."""


class HypothesisError(GaussMultError):
    """Instance lies outside the hypotheses of the standard-form reduction.

    Raised for zero or mixed-sign determinants of the single-mode X blocks.
    """


class TruncationError(GaussMultError):
    """Number-basis truncation cannot reach the requested tail tolerance."""
