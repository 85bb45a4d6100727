"""Error taxonomy shared by the engine, simulators and the CLI.

Every error carries an ``exit_code`` so the command line can report the
failure category through the process status.
"""


class WorkbenchError(Exception):
    exit_code = 1


class ConfigError(WorkbenchError, ValueError):
    exit_code = 2


class ParameterError(WorkbenchError, ValueError):
    exit_code = 2


class SchemaError(WorkbenchError, ValueError):
    exit_code = 3

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)


class ReplacementMissError(WorkbenchError):
    exit_code = 4


class StaleEventError(WorkbenchError):
    exit_code = 4


class TraceCorruptionError(WorkbenchError):
    exit_code = 5


class DomainError(WorkbenchError, ValueError):
    exit_code = 6


class NormalizationError(DomainError):
    exit_code = 6


class InitError(WorkbenchError):
    exit_code = 7


class LookupFailure(WorkbenchError, KeyError):
    exit_code = 8

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class OutputPathError(WorkbenchError):
    exit_code = 9
