"""
Errors raised by the symclaw solver, learner and tooling.
"""


class UnsupportedOperationError(ValueError):
    """A traced function used a primitive outside the supported op set."""

    def __init__(self, op_kind: str):
        self.op_kind = op_kind
        super().__init__(f"Unsupported operation '{op_kind}' encountered at tape build")


class DimensionMismatchError(ValueError):
    def __init__(self, expected: int, actual: int, what: str = "state"):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"{what} dimension mismatch: expected {expected}, got {actual}"
        )


class GridMismatchError(ValueError):
    def __init__(self, left_shape: tuple, right_shape: tuple):
        self.left_shape = tuple(left_shape)
        self.right_shape = tuple(right_shape)
        super().__init__(
            f"Grid mismatch: {self.left_shape} cannot be compared with "
            f"{self.right_shape}"
        )


class ZeroNormalizationError(ValueError):
    def __init__(self):
        super().__init__("Recurrent loss denominator is zero (all-zero target data)")


class NonFiniteStateError(RuntimeError):
    """
    A rollout produced a NaN or infinity.

    Attributes:
        step (int): Time step at which the first non-finite value appeared.
        axis (int | None): Array axis (spatial direction) of the offending cell.
        index (tuple | None): Cell index of the offending value.
    """

    def __init__(self, step: int, index: tuple | None = None, axis: int | None = None):
        self.step = step
        self.index = index
        self.axis = axis
        where = ""
        if index is not None:
            cell = index[axis] if axis is not None and len(index) > axis else index
            where = (
                f" at cell {index} (interfaces {cell}-1/2 and {cell}+1/2"
                f" along axis {axis})"
            )
        super().__init__(f"Non-finite state at step {step}{where}")


class CFLViolationError(RuntimeError):
    def __init__(self, step: int, cfl: float, limit: float = 1.0):
        self.step = step
        self.cfl = cfl
        self.limit = limit
        super().__init__(
            f"CFL condition violated at step {step}: {cfl:.6g} > {limit:.6g}"
        )


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, step: int, last_good_checkpoint: str | None):
        self.epoch = epoch
        self.step = step
        self.last_good_checkpoint = last_good_checkpoint
        super().__init__(
            f"Training diverged in epoch {epoch} (optimizer step {step}); "
            f"last good checkpoint: {last_good_checkpoint}"
        )
