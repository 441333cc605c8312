"""Error hierarchy shared by every layer"""
from typing import Optional, Sequence


class StyleMomentsError(Exception):
    """Base class for all errors raised by the project"""


class InvalidArgumentError(StyleMomentsError, ValueError):
    """An operation received arguments outside its contract"""


class FormatError(StyleMomentsError, ValueError):
    """A file or byte stream does not follow the expected format"""


class InvariantViolationError(StyleMomentsError, RuntimeError):
    """A structure that should satisfy an invariant does not"""


class StorageError(StyleMomentsError, OSError):
    """Reading or writing a file failed"""


class ConfigError(StyleMomentsError, ValueError):
    """A run configuration or command line could not be resolved"""


class NumericError(StyleMomentsError, ArithmeticError):
    """A computation produced non-finite values"""

    def __init__(
        self,
        message: str,
        step: Optional[int] = None,
        batch_seeds: Optional[Sequence[int]] = None,
    ):
        self.step = step
        self.batch_seeds = list(batch_seeds) if batch_seeds is not None else None
        details = []
        if step is not None:
            details.append(f"step={step}")
        if self.batch_seeds is not None:
            details.append(f"batch_seeds={self.batch_seeds}")
        super().__init__(f"{message} ({', '.join(details)})" if details else message)
