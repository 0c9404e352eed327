from curvedchsh.exceptions import CurvedChshError


class WorldviewError(CurvedChshError):
    exit_code = 6


class UnknownPoint(WorldviewError):
    pass


class UnknownField(WorldviewError):
    pass


class CyclicRelation(WorldviewError):
    """The causal relation is not a strict partial order."""


class StateSpaceTooLarge(WorldviewError):
    pass


class ZeroConditioningMass(WorldviewError):
    """A conditioning event carries no probability."""


class ShapeMismatch(WorldviewError):
    pass


class PosetTooLarge(WorldviewError):
    pass


class DagFormatError(WorldviewError):
    exit_code = 2

    def __init__(self, message: str, line: int = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line
