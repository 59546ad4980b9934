class CurvFlowError(Exception):
    pass


class DomainError(CurvFlowError, ValueError):
    """Radial values outside the open interval (0, rho_max)."""


class StarShapedError(CurvFlowError, ValueError):
    """Support function at or below the star-shapedness threshold."""


class StabilityError(CurvFlowError):
    """Requested time step exceeds the explicit stability bound."""


class ConsistencyError(CurvFlowError):
    """Internal numerical consistency check failed."""


class ConfigError(CurvFlowError, ValueError):
    pass
