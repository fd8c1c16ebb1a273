"""Exception types raised across the package."""


class TruncationTooSmall(ValueError):
    """The Fock truncation cannot hold the requested coherent amplitude."""


class DimensionMismatch(ValueError):
    """Operator and state dimensions are incompatible."""


class NegativeProbability(ValueError):
    """An (alpha, f) pair would produce a negative photon probability."""


class StepTooLarge(RuntimeError):
    """The integrator step violates a stability or accuracy bound."""


class DeltaPTooLarge(RuntimeError):
    """The per-step jump probability of a trajectory exceeded its bound."""


class NegligibleBranch(ValueError):
    """A measurement branch has vanishing probability."""


class NotPure(ValueError):
    """A pure state was required."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""
