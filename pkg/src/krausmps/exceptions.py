"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter is outside its mathematically valid range."""


class ValidationError(ValueError):
    """An input fails a structural check (non-unitary gate, bad spectrum, ...)."""


class UnsupportedArityError(ValueError):
    """An operation requires a two-operator Kraus set and got something else."""


class CapacityError(ValueError):
    """A dense-representation guard was exceeded."""


class ZeroProbabilityError(RuntimeError):
    """A zero-probability channel outcome was selected; indicates an upstream bug."""
