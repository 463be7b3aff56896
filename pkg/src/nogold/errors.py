"""Exception types shared by the library and the command line front end."""


class ValidationError(ValueError):
    """Malformed input: off-simplex probabilities, negative counts, bad levels."""


class InfeasiblePointError(ValueError):
    """A point that is not in the feasible set was handed to a constructor."""


class ResourceError(RuntimeError):
    """The requested computation exceeds the configured enumeration budget."""

    def __init__(self, message: str, required: int | None = None):
        super().__init__(message)
        self.required = required
