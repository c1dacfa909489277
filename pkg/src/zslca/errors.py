"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`ZslError`. The two
intermediate classes map onto CLI exit codes: :class:`DataError` (2) for bad
inputs and :class:`NumericalError` (3) for computations that cannot produce a
finite answer.
"""


class ZslError(Exception):
    exit_code = 2


class DataError(ZslError, ValueError):
    exit_code = 2


class NumericalError(ZslError, ArithmeticError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, path, line, message, column=None):
        self.path = str(path)
        self.line = line
        self.column = column
        where = f"{self.path}:{line}"
        if column is not None:
            where += f":{column}"
        super().__init__(f"{where}: {message}")


class EmptyMatrix(DataError):
    pass


class AllZeroColumn(DataError):
    def __init__(self, class_name):
        self.class_name = class_name
        super().__init__(f"class {class_name!r} has no attribute mass")


class AllZero(DataError):
    pass


class NotNormalized(DataError):
    pass


class AlreadyExpanded(DataError):
    pass


class ClassMismatch(DataError):
    pass


class UnknownClass(DataError):
    pass


class DuplicateCandidate(UnknownClass):
    pass


class DuplicateSampleId(DataError):
    pass


class SplitOverlap(DataError):
    pass


class InfeasibleConfig(DataError):
    pass


class ConstantRow(DataError):
    def __init__(self, attribute):
        self.attribute = attribute
        super().__init__(f"attribute {attribute!r} is constant over seen classes")


class NoTrainingData(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyCandidates(DataError):
    pass


class NonPositiveSigma(DataError):
    pass


class AllZeroWeights(NumericalError):
    pass


class NonFiniteWeight(NumericalError):
    pass


class EmptyCdf(DataError):
    pass


class ZeroTolerance(NumericalError):
    pass


class MissingPrediction(DataError):
    pass


class CoverageMismatch(DataError):
    pass


class EmptyPool(DataError):
    pass


class TooFewCandidates(DataError):
    pass
