"""Exception hierarchy shared across the forward pipeline and the sampler."""


class ShapeError(Exception):
    """Base class for all package errors."""


class InvalidGeometry(ShapeError):
    """Inner boundary touches or crosses the outer circle."""


class MeshInversion(ShapeError):
    """An element has a non-positive Jacobian somewhere."""


class SolverFailure(ShapeError):
    """Sparse factorisation failed or the residual check did not pass."""


class MeshMismatch(ShapeError):
    """Fields defined on different meshes were combined."""


class BallOutsideDomain(ShapeError):
    """A sensor ball (or evaluation point) is not covered by the mesh."""


class ZeroWithinVariance(ShapeError):
    """Every chain passed to R-hat is constant."""


class ConfigError(ShapeError):
    """Configuration file is malformed or internally inconsistent."""


class PipelineError(ShapeError):
    """Wraps a failure inside the forward map and records the stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
