"""Exception types raised across the package."""


class CouplingLabError(ValueError):
    """Base class for every validation error raised by coupling_lab."""


class InvalidMetric(CouplingLabError):
    pass


class AsymmetricDistance(InvalidMetric):
    def __init__(self, i, j, dij, dji):
        self.indices = (i, j)
        super().__init__(f"dist[{i}][{j}]={dij!r} != dist[{j}][{i}]={dji!r}")


class NegativeDistance(InvalidMetric):
    def __init__(self, i, j, value):
        self.indices = (i, j)
        super().__init__(f"dist[{i}][{j}]={value!r} is negative")


class TriangleViolation(InvalidMetric):
    def __init__(self, i, j, k, excess):
        self.indices = (i, j, k)
        super().__init__(
            f"dist[{i}][{k}] exceeds dist[{i}][{j}] + dist[{j}][{k}] by {excess!r}"
        )


class InvalidMeasure(CouplingLabError):
    pass


class SizeOverflow(CouplingLabError):
    pass


class SpaceMismatch(CouplingLabError):
    pass


class ShapeMismatch(CouplingLabError):
    pass


class MarginalMismatch(CouplingLabError):
    def __init__(self, deviation, what="shared marginal"):
        self.deviation = float(deviation)
        super().__init__(f"{what} mismatch, sup-norm deviation {deviation:.3e}")


class TooLargeForOracle(CouplingLabError):
    pass


class TooLargeForEnumeration(CouplingLabError):
    pass


class EmptySequence(CouplingLabError):
    pass


class SolverFailure(RuntimeError):
    """The exact solver hit its pivot cap; indicates a bug, not bad input."""
