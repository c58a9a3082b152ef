"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class AttrWalkError(Exception):
    exit_code = 1
    code = "error"


class InputError(AttrWalkError):
    exit_code = 3
    code = "input"


class ParseError(AttrWalkError):
    exit_code = 4
    code = "parse"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(AttrWalkError):
    exit_code = 4
    code = "format"


class ConfigError(AttrWalkError):
    exit_code = 5
    code = "config"


class SchemaError(AttrWalkError):
    exit_code = 5
    code = "schema"


class ShapeError(AttrWalkError):
    exit_code = 5
    code = "shape"


class DataError(AttrWalkError):
    exit_code = 6
    code = "data"


class SplitError(AttrWalkError):
    exit_code = 6
    code = "split"

    def __init__(self, message, achievable_fraction=None):
        super().__init__(message)
        self.achievable_fraction = achievable_fraction


class TrainingError(AttrWalkError):
    exit_code = 6
    code = "training"


class CoverageError(AttrWalkError):
    exit_code = 7
    code = "coverage"

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = list(missing)


class StageError(AttrWalkError):
    """Wraps an error raised inside a pipeline stage, tagged with the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        self.code = getattr(cause, "code", "error")
