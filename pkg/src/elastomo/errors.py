"""Exception types shared across the package."""


class ElastomoError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(ElastomoError, ValueError):
    """An argument is outside its documented range."""


class InvalidMaterialError(ElastomoError, ValueError):
    """A material field violates positivity requirements."""


class InvalidPatchError(ElastomoError, ValueError):
    """A boundary patch is empty or malformed."""


class InvalidContrastError(ElastomoError, ValueError):
    """Parameter contrasts violate the required ordering."""


class InvalidPhantomError(ElastomoError, ValueError):
    """A phantom shape lies outside, or touches, the domain boundary."""


class IncompatibleOperandsError(ElastomoError, ValueError):
    """Two operands were built against different meshes, bases or grids."""


class DegenerateInputError(ElastomoError, ValueError):
    """Input is degenerate for the requested decomposition (e.g. zero matrix)."""


class FactorizationFailureError(ElastomoError, RuntimeError):
    """A matrix factorization failed."""


class NotPositiveDefiniteError(FactorizationFailureError):
    """A matrix required to be symmetric positive definite is not."""


class NumericalFailureError(ElastomoError, RuntimeError):
    """A numerical consistency check failed or a value became non-finite."""


class ConfigError(ElastomoError, ValueError):
    """An experiment configuration is invalid or cannot be parsed."""
