"""Exception types shared across the package."""


class ResonantLorenzError(Exception):
    """Base class for all package errors."""


class OrbitDiverged(ResonantLorenzError):
    """An orbit left the divergence box where boundedness was required."""

    def __init__(self, step: int, bound: float):
        super().__init__(f"orbit diverged at step {step} (|component| > {bound:g})")
        self.step = step
        self.bound = bound


class OutOfRange(ResonantLorenzError):
    """Parameters produce multipliers or an unfolding outside the admissible set."""


class OutsideDomain(ResonantLorenzError):
    """A state lies outside the domain on which a map is defined."""


class NoConvergence(ResonantLorenzError):
    """An internal solve failed."""


class DegenerateScale(ResonantLorenzError):
    """A rescaling factor vanished."""


class IncompatibleParity(ResonantLorenzError):
    """No unfolding at this k realizes the target signs."""

    def __init__(self, k: int, reason: str, admissible: list[int]):
        near = ", ".join(str(a) for a in admissible) or "none in range"
        super().__init__(f"IncompatibleParity at k={k}: {reason}; nearest admissible k: {near}")
        self.k = k
        self.admissible = admissible


class PrecisionLoss(ResonantLorenzError):
    """The requested k is beyond what double-precision unfoldings can resolve."""


class ParseError(ResonantLorenzError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class InvariantViolation(ResonantLorenzError):
    """A model specification breaks one of the defining non-degeneracy conditions."""
