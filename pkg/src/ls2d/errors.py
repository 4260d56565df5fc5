"""Exception types raised across the package."""


class LS2DError(Exception):
    """Base class for all package errors."""


class ConfigError(LS2DError):
    pass


class NoProjection(LS2DError):
    pass


class NotInBoundaryRegion(LS2DError):
    pass


class UnsupportedOrder(LS2DError):
    pass


class ShapeMismatch(LS2DError):
    pass


class AliasError(LS2DError):
    pass


class QuadratureFailure(LS2DError):
    pass


class TargetOutsidePatch(LS2DError):
    pass


class ResonantCell(LS2DError):
    pass


class IllConditioned(LS2DError):
    pass


class TargetOutsideOmega(LS2DError):
    pass


class TargetNotInBoundaryRegion(LS2DError):
    pass


class MaxIterations(LS2DError):
    pass


class SingularMode(LS2DError):
    pass
