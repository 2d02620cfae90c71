"""Exception types shared across the package."""


class KmsmorError(Exception):
    """Base class for all package errors."""


class ModelValidationError(KmsmorError, ValueError):
    """A system matrix or patch definition violates a structural invariant.

    Carries the offending object name and the check that failed so callers
    can surface actionable messages.
    """

    def __init__(self, name: str, check: str, detail: str = ""):
        self.name = name
        self.check = check
        msg = f"{name}: failed {check}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ConfigError(KmsmorError, ValueError):
    """Invalid user-facing configuration (CLI flags, config files, manifests)."""


class NumericalError(KmsmorError, RuntimeError):
    """A numerical operation failed (singular factorization, non-converged solve)."""
