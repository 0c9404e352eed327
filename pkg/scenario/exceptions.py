from geometry.exceptions import GeometryError


class NoInterception(GeometryError):
    """The observer worldline could not be steered onto the light ray from p_E."""


class InvalidExperimentConfig(GeometryError):
    exit_code = 2
