from curvedchsh.exceptions import CurvedChshError


class SweepError(CurvedChshError):
    exit_code = 7


class TooManyFailures(SweepError):
    """More perturbed geometries failed to build than the sweep tolerates."""


class InvalidSweep(SweepError):
    exit_code = 2
