"""
Error types raised by udsmodellib
"""

__all__ = [
    'UdsError',
    'DomainError',
    'ModelEvaluationError',
    'UsageError',
    'RankDeficiencyError',
    'FitInitializationError',
    'SchemaError',
]

class UdsError(ValueError):
    """
    Base class for every error raised deliberately by udsmodellib

    The kind is used as the machine readable diagnostic tag printed by the CLI
    """
    kind: str = 'runtime'

    def diagnostic(self) -> str:
        """
        Single line diagnostic for the CLI
        """
        return f'error[{self.kind}] {self}'

class DomainError(UdsError):
    """
    A hydraulic primitive was called outside of its physical domain
    """
    kind = 'domain'

class ModelEvaluationError(UdsError):
    """
    A model equation produced a non-finite value
    """
    kind = 'model'

    def __init__(self, equation: str, value: float) -> None:
        self.equation = equation
        self.value = value
        super().__init__(f'{equation} evaluated to non-finite value {value!r}')

class UsageError(UdsError):
    """
    An API or CLI was called with inconsistent arguments
    """
    kind = 'usage'

class RankDeficiencyError(UdsError):
    """
    A linear least squares design matrix is rank deficient

    Args:
        columns (list[str]): The names of the collinear design columns
    """
    kind = 'rank'

    def __init__(self, columns: list[str]) -> None:
        self.columns = columns
        super().__init__(f'Design matrix is rank deficient, collinear columns: {", ".join(columns)}')

class FitInitializationError(UdsError):
    """
    Non-linear least squares could not start from the initial parameters
    """
    kind = 'fit'

class SchemaError(UdsError):
    """
    A configuration document or scenario file failed validation

    Args:
        message (str): What is wrong
        source (optional str | None default: None): The file/URI being validated
        line (optional int | None default: None): 1-based line of the problem if known
        column (optional int | str | None default: None): 1-based column or column name if known
    """
    kind = 'schema'

    def __init__(
        self,
        message: str,
        source: str | None = None,
        line: int | None = None,
        column: int | str | None = None
    ) -> None:
        self.message = message
        self.source = source
        self.line = line
        self.column = column
        super().__init__(message)

    def diagnostic(self) -> str:
        location = [str(part) for part in (self.source, self.line, self.column) if part is not None]
        prefix = f'{":".join(location)}: ' if location else ''
        return f'error[{self.kind}] {prefix}{self.message}'
