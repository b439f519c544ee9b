"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Invalid shape parameters (non-embedded perturbation, bad axes, ...)."""


class MeshError(RuntimeError):
    """Mesh failed a structural invariant (not closed, bad orientation, ...)."""


class SolverError(RuntimeError):
    """Boundary-element solve failed or produced an unusable density."""


class EvalDomainError(ValueError):
    """Field evaluation requested inside the body or the near-surface shell."""


class TransportError(RuntimeError):
    """Level-set transport aborted (suspected critical point, no convergence)."""


class AdmissibilityError(ValueError):
    """Parameter set outside the admissible region (c+d >= 0, d >= 0, beta bound)."""


class ConfigError(ValueError):
    """Scenario configuration failed to parse or validate."""
