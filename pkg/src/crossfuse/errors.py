"""Exception types raised across the package."""


class CrossfuseError(Exception):
    """Base class for all package errors."""


class DimensionError(CrossfuseError, ValueError):
    """Operand shapes do not conform for an operation."""

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = shapes
        shown = ", ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {shown}")


class ContractError(CrossfuseError, ValueError):
    """A precondition of an operation was violated."""


class ParameterError(CrossfuseError, ValueError):
    """A hyperparameter or configuration value is out of range."""


class ParseError(CrossfuseError, ValueError):
    """An input file could not be parsed."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class DegenerateClusterError(CrossfuseError, ArithmeticError):
    """A cluster lost all of its soft assignment mass."""


class DivergenceError(CrossfuseError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, phase, epoch, value):
        self.phase = phase
        self.epoch = epoch
        super().__init__(f"{phase}: non-finite loss {value!r} at epoch {epoch}")
