"""Exception types shared across the package."""


class UsageError(ValueError):
    """Caller passed arguments that violate an operation's preconditions."""


class ResourceError(RuntimeError):
    """A desk-scale size guard was exceeded."""
