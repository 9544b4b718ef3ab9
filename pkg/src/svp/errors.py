"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SVPError(Exception):
    exit_code = 1


class ConfigError(SVPError, ValueError):
    exit_code = 2


class FormatError(SVPError, ValueError):
    """Malformed or truncated binary file."""

    exit_code = 3

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DataIntegrityError(SVPError, ValueError):
    exit_code = 3


class ZeroNormError(DataIntegrityError):
    def __init__(self, frames):
        self.frames = list(frames)
        super().__init__(f"zero-norm descriptor at frame(s) {self.frames}")


class DegenerateGroupError(SVPError, ArithmeticError):
    exit_code = 4

    def __init__(self, groups, iteration=None):
        self.groups = list(groups)
        self.iteration = iteration
        where = "" if iteration is None else f" at iteration {iteration}"
        super().__init__(f"soft group size below guard for group(s) {self.groups}{where}")


class InfeasibleError(SVPError):
    exit_code = 4


class PlanViolationError(SVPError, ValueError):
    exit_code = 4

    def __init__(self, message, subscene=None):
        super().__init__(message)
        self.subscene = subscene
