"""Exception hierarchy. Each family maps to a distinct CLI exit code."""


class VsbError(Exception):
    exit_code = 1


class FrequencyRangeError(VsbError, ValueError):
    """A frequency lies outside the valid discrete-time range."""

    exit_code = 3


class GeometryError(VsbError, ValueError):
    exit_code = 3


class SingularityError(GeometryError):
    """Source and receiver coincide."""


class IllPosedControlError(VsbError):
    def __init__(self, message, condition_number):
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number

    exit_code = 4


class DivergenceError(VsbError, FloatingPointError):
    """Adaptive coefficients or error signals became non-finite."""

    exit_code = 4

    def __init__(self, message, sample_index=None, step_size=None):
        super().__init__(message)
        self.sample_index = sample_index
        self.step_size = step_size


class WavParseError(VsbError):
    """Malformed or unsupported WAV file. ``field`` names the offending header field."""

    exit_code = 5

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class ResolutionError(VsbError, ValueError):
    exit_code = 3


class ScenarioError(VsbError):
    """Schema violation; ``path`` is the dotted field path."""

    exit_code = 3

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
