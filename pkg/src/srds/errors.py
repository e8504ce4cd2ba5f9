"""Exception taxonomy shared across the package.

The three classes map onto the stable CLI exit codes: ConfigError -> 2,
AuditError -> 3, SolverFailure -> 4.
"""


class ConfigError(ValueError):
    """Run configuration cannot be parsed or violates the schema."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


class AuditError(ValueError):
    """A declared assumption failed its build-time audit.

    ``reason`` is a short machine-parsable token (e.g. "ellipticity",
    "g(0)!=0", "holder", "growth", "quasi-positivity").
    """

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


class SolverFailure(RuntimeError):
    """Runtime failure inside a simulation (non-finite state, solve failure)."""

    def __init__(self, reason: str, detail: str = "", step: int | None = None):
        self.reason = reason
        self.detail = detail
        self.step = step
        msg = reason
        if step is not None:
            msg += f" at step {step}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
