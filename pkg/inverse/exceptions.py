from curvedchsh.exceptions import CurvedChshError


class InverseError(CurvedChshError):
    exit_code = 5


class InverseNoConvergence(InverseError):
    """The solver ran out of iterations; ``best`` holds the best iterate seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best

    def to_dict(self):
        payload = super().to_dict()
        if self.best is not None:
            payload['best'] = self.best.as_dict()
        return payload


class InvalidInverseProblem(InverseError):
    exit_code = 2
