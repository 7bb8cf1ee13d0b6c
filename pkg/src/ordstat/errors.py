"""Exception and warning types raised across the package."""


class OrdstatError(Exception):
    """Base class for package errors."""


class ModelFileError(OrdstatError, ValueError):
    """Malformed model or estimator specification file."""


class InvalidParameter(OrdstatError, ValueError):
    """A family parameter lies outside its allowed range."""


class NonPositiveTheta(OrdstatError, ValueError):
    pass


class UnsupportedFamily(OrdstatError, ValueError):
    pass


class QuadratureFailure(OrdstatError, ArithmeticError):
    pass


class OutOfSupport(OrdstatError, ValueError):
    pass


class MomentDivergence(OrdstatError, ArithmeticError):
    pass


class ZeroWeights(OrdstatError, ValueError):
    pass


class InapplicableTag(OrdstatError, ValueError):
    pass


class DegenerateDenominator(OrdstatError, ArithmeticError):
    """The pooling region carries no probability mass."""


class ZeroDensity(OrdstatError, ValueError):
    pass


class UnknownPanel(OrdstatError, ValueError):
    pass


class Inconclusive(OrdstatError):
    """A numerical classification could not be settled.

    ``lambdas`` and ``values`` keep whatever was computed before giving up.
    """

    def __init__(self, message, lambdas=(), values=()):
        super().__init__(message)
        self.lambdas = list(lambdas)
        self.values = list(values)


class HypothesisNotVerified(UserWarning):
    """Lemma hypotheses failed; a returned interval is flagged untrusted."""


class NonPositiveEstimate(UserWarning):
    """A scale estimate came out non-positive."""
