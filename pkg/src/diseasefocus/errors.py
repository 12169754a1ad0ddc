"""Exception and warning types raised across the toolkit."""


class DiseaseFocusError(Exception):
    """Base class for all toolkit errors."""


# volume I/O
class VolumeIOError(DiseaseFocusError):
    pass


class UnsupportedDatatype(VolumeIOError):
    pass


class CorruptHeader(VolumeIOError):
    pass


class DimensionMismatch(VolumeIOError):
    pass


class NonFiniteData(VolumeIOError):
    pass


class RangeOverflow(VolumeIOError):
    pass


class IoFailure(VolumeIOError):
    pass


class GridMismatch(DiseaseFocusError):
    def __init__(self, a_shape, b_shape, detail=""):
        self.a_shape = tuple(a_shape)
        self.b_shape = tuple(b_shape)
        msg = f"grid mismatch: {self.a_shape} vs {self.b_shape}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


# tables
class ParseError(DiseaseFocusError):
    def __init__(self, line, message, path=None):
        self.line = line
        self.path = path
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {message}")


class DuplicateRegion(DiseaseFocusError):
    pass


class UnknownCategoryToken(DiseaseFocusError):
    pass


class UnknownRegion(DiseaseFocusError):
    pass


# analysis
class EmptyLabelMap(DiseaseFocusError):
    pass


class EmptyGroup(DiseaseFocusError):
    pass


class EmptyInput(DiseaseFocusError):
    pass


class SingleClassInput(DiseaseFocusError):
    pass


class NoPositives(DiseaseFocusError):
    pass


class CropTooLarge(DiseaseFocusError):
    pass


class OutOfBoundsGeometry(DiseaseFocusError):
    pass


# warnings
class ConstantMapWarning(UserWarning):
    pass


class DegenerateDenominatorWarning(UserWarning):
    pass


class ConstantFeatureWarning(UserWarning):
    pass


class UnknownRegionWarning(UserWarning):
    pass


class EmptyGroupWarning(UserWarning):
    pass
