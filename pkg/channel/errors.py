from typing import Optional, Tuple


class SolverError(Exception):
    """Base class of every error raised by the toolkit."""


class InvalidInputError(SolverError, ValueError):
    pass


class UndefinedSNRError(InvalidInputError):
    pass


class CapacityError(InvalidInputError):
    def __init__(self, message: str, cell: Tuple[int, int]):
        super().__init__(message)
        self.cell = cell


class GenerationError(SolverError):
    pass


class DatasetFormatError(SolverError):
    def __init__(self, message: str, field: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DegenerateSystemError(SolverError):
    def __init__(self, message: str, pair: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.pair = pair


class TrainingDivergedError(SolverError):
    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(SolverError):
    def __init__(self, message: str, field: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class MissingWeightsError(SolverError):
    pass
