"""Exception hierarchy shared by all torusflow modules."""


class TorusFlowError(Exception):
    """Base class for every error raised by the package."""


class InvalidField(TorusFlowError, ValueError):
    pass


class GridMismatch(TorusFlowError, ValueError):
    pass


class NonPositiveField(TorusFlowError, ValueError):
    pass


class EmptyInput(TorusFlowError, ValueError):
    pass


class PointSetMismatch(TorusFlowError, ValueError):
    pass


class InvalidOrder(TorusFlowError, ValueError):
    pass


class ResolutionTooCoarse(TorusFlowError, ValueError):
    pass


class GridAlignment(TorusFlowError, ValueError):
    pass


class StepRejected(TorusFlowError, ArithmeticError):
    """A time step violated the discrete maximum principle."""


class StiffnessFailure(TorusFlowError, ArithmeticError):
    """Too many consecutive step rejections; the run cannot continue."""


class InsufficientData(TorusFlowError, ValueError):
    pass


class ConfigSyntax(TorusFlowError, ValueError):
    pass


class ConfigInvalid(TorusFlowError, ValueError):
    pass


class SnapshotCorrupt(TorusFlowError, ValueError):
    pass


class IoError(TorusFlowError, OSError):
    pass
