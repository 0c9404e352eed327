from curvedchsh.exceptions import CurvedChshError


class DynamicsError(CurvedChshError):
    exit_code = 4


class ResolutionTooLow(DynamicsError):
    """Fewer quadrature nodes or samples than the accuracy contract needs."""


class SeedRequired(DynamicsError):
    pass


class InvalidDistribution(DynamicsError):
    pass
