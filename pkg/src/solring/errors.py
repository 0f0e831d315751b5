"""Exception types shared across the package."""


class SolringError(Exception):
    """Base class for package errors."""


class GridMismatchError(SolringError, ValueError):
    """Fields passed to a binary operation live on different grids."""


class ResolutionError(SolringError, ValueError):
    """A requested structure is too narrow or too wide for the grid/box."""


class OrthogonalityError(SolringError, ValueError):
    """Inputs required to be (near-)orthogonal are not; carries the overlap."""

    def __init__(self, overlap: complex, limit: float):
        self.overlap = overlap
        self.limit = limit
        super().__init__(
            f"|overlap| = {abs(overlap):.3e} exceeds the allowed {limit:.1e}"
        )


class TopologyError(SolringError, ValueError):
    """A winding number that must be an integer on the ring is not."""


class BlowUpError(SolringError, RuntimeError):
    """NaN/Inf appeared during propagation; carries the step index."""

    def __init__(self, step_index: int, t: float):
        self.step_index = step_index
        self.t = t
        super().__init__(f"non-finite field after step {step_index} (t = {t:.6g})")


class PhaseAliasError(SolringError, ValueError):
    """Kinetic phase per step exceeds pi on an occupied mode."""


class DegenerateProbabilityError(SolringError, ValueError):
    """A two-outcome probability is too close to 0 or 1 for a CFI estimate."""


class DerivativeError(SolringError, ValueError):
    """A finite-difference derivative failed a sanity check."""


class NormalizationError(SolringError, ValueError):
    """A field that must be unit-normalized is not."""


class UndefinedAngleError(SolringError, ValueError):
    """theta_chi is undefined (no twisting to undo)."""


class FockCutoffError(SolringError, ValueError):
    """Fock-space truncation tail exceeds the audit threshold."""


class BarrierTuneError(SolringError, RuntimeError):
    """Bisection for the 50% reflection point failed to bracket."""


class InsufficientTrajectoriesError(SolringError, ValueError):
    """An ensemble statistic needs at least two trajectories."""


class ConfigError(SolringError, ValueError):
    """Experiment configuration failed validation; message names the field."""
