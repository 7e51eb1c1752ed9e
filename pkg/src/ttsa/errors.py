"""Exception hierarchy shared by all modules."""


class ValidationError(ValueError):
    """A constructed object violates one of its declared invariants."""


class ErgodicityError(RuntimeError):
    """Markov chain has no unique aperiodic stationary regime."""


class MixingError(RuntimeError):
    """Total-variation decay admits no geometric envelope over the horizon."""


class SupportError(ValueError):
    """Target policy puts mass where the behavior policy has none."""


class SingularMatrixError(RuntimeError):
    """A required matrix inverse is undefined or badly conditioned."""


class AssumptionViolation(RuntimeError):
    """A run or probe left the regime in which the guarantees apply."""


class ResourceCapError(RuntimeError):
    """A schedule calculator asked for more samples than the configured cap."""


class ConfigError(ValueError):
    """Experiment configuration is malformed or inconsistent."""


class InsufficientSignalError(RuntimeError):
    """A fit was requested on data that cannot support it."""
