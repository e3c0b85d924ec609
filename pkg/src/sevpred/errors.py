"""Exception hierarchy shared across the pipeline.

Three families matter to callers: ``DataError`` (bad input data or
configuration of data), ``ShapeError`` (incompatible array dimensions), and
``NumericError`` (non-finite values during computation). The CLI maps these
to distinct exit codes.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class DataError(PipelineError):
    """Invalid data content: bad labels, missing columns, empty inputs."""


class ShapeError(PipelineError):
    """Mismatched array shapes or widths between pipeline stages."""


class NumericError(PipelineError):
    """Non-finite values encountered where finite math was required."""


# -- dataset ---------------------------------------------------------------

class MissingColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"column {name!r} not found")
        self.name = name


class EmptyFile(DataError):
    pass


class TargetOutOfRange(DataError):
    def __init__(self, row: int, value, cardinality: int):
        super().__init__(
            f"row {row}: target value {value!r} not in 1..{cardinality}"
        )
        self.row = row
        self.value = value


class AllMissingColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"numeric column {name!r} has no observed values")
        self.name = name


class InvalidProportions(DataError):
    pass


# -- association / preprocess ----------------------------------------------

class LengthMismatch(ShapeError):
    pass


class UnknownColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"column {name!r} not fitted or not in schema")
        self.name = name


class DimensionMismatch(ShapeError):
    pass


class EmptyInput(DataError):
    pass


# -- neural / models ---------------------------------------------------------

class ShapeMismatch(ShapeError):
    pass


class WidthMismatch(ShapeError):
    pass


class CacheMismatch(ShapeError):
    pass


class NonFiniteActivation(NumericError):
    pass


class LabelOutOfRange(DataError):
    pass


class MissingClass(DataError):
    def __init__(self, label: int):
        super().__init__(f"class {label} absent from training labels")
        self.label = label


# -- evaluation ---------------------------------------------------------------

class ClassTooSmall(DataError):
    def __init__(self, label: int, count: int, k: int):
        super().__init__(f"class {label} has {count} rows, fewer than k={k}")
        self.label = label


class EmptyConfusion(DataError):
    pass
