"""Exception types shared across the package."""


class NozlimitError(Exception):
    """Base class for all package errors."""


class GeometryError(NozlimitError):
    """Invalid nozzle geometry or degenerate grid mapping."""


class ClosureDomainError(NozlimitError):
    """A gas-dynamic closure was evaluated outside its domain (e.g. p <= 0).

    Carries the first offending cell and its value so solvers can report
    exactly where a state went bad.
    """

    def __init__(self, message, cell=None, value=None):
        self.cell = cell
        self.value = value
        if cell is not None:
            message = f"{message} at cell {cell} (value {value!r})"
        super().__init__(message)


class ChokedFlowError(NozlimitError):
    """No subsonic Bernoulli root exists for the requested state.

    ``margin`` is how far the data sits past the sonic threshold
    (positive means choked).
    """

    def __init__(self, message, margin=None, cell=None):
        self.margin = margin
        self.cell = cell
        if margin is not None:
            message = f"{message} (sonic margin {margin:.3e})"
        super().__init__(message)


class FarFieldError(NozlimitError):
    """Upstream data invalid or the requested mass flux is not realizable."""


class AssemblyError(NozlimitError):
    """Elliptic operator assembly failed (e.g. nonpositive coefficient)."""


class LinearSolverError(NozlimitError):
    """Iterative linear solve broke down or hit its iteration cap."""

    def __init__(self, message, residuals=None):
        self.residuals = list(residuals) if residuals is not None else []
        super().__init__(message)


class SolverStateError(NozlimitError):
    """A solver-internal field left its admissible range."""


class PicardBreakdownError(NozlimitError):
    """The nonlinear iteration could not continue (choking, divergence)."""

    def __init__(self, message, history=None):
        self.history = list(history) if history is not None else []
        super().__init__(message)


class ResolutionError(NozlimitError):
    """A diagnostic was requested below its resolvable scale."""


class InputError(NozlimitError):
    """Bad arguments to a harness routine."""


class ConfigError(NozlimitError):
    """Run configuration failed validation."""
