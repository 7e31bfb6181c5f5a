"""Exception types shared across the package."""


class ModelDomainError(ValueError):
    """A model quantity was evaluated where it is undefined: at a node of the
    wavefunction, at a source point, or outside the supported region."""


class DegenerateParametersError(ValueError):
    """An operation requires unequal superposition amplitudes (a != b)."""


class BracketError(ValueError):
    """A root bracket does not contain a sign change."""


class ConfigurationError(ValueError):
    """Invalid run configuration or a pathological sampling setup."""


class InsufficientSampleError(RuntimeError):
    """Too few surviving ensemble members to support a statistic."""
