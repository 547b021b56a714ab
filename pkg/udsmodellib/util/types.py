"""
Types shared across the udsmodellib package
"""

from typing import Any, Callable, Protocol

__all__ = [
    'Logger',
    'LogFn',
    'log_fn',
]

class Logger(Protocol):
    """
    Generic logger interface containing a log method for logging/buffering messages and a flush
    method for flushing log buffers
    """

    ERROR: str = 'ERROR'
    WARNING: str = 'WARNING'
    INFO: str = 'INFO'
    DEBUG: str = 'DEBUG'

    def log(
        self,
        *msgs: Any,
        sep: str = ' ',
        end: str = '\n',
        level: str | None = None,
        time_fmt: str | None = None,
        flush: bool = False
    ) -> None:
        """
        Log a message

        Args:
            msgs (*Any): The message(s) to log, converted with str
            sep (optional str default: ' '): The separator to use when joining the messages
            end (optional str default: '\n'): String to append to the end of the message
            level (optional str | None default: None): The log level of the message
            time_fmt (optional str | None default: None): The strftime format to prefix the message
            with or None to not include the time
            flush (optional bool default: False): Whether to flush the logs after logging the
            message
        """

    def flush(self, suppress_errors: bool | None = None) -> None:
        """
        Flush the logs

        Args:
            suppress_errors (optional bool | None default: None): Whether to suppress errors that
            occur while flushing the logs
        """

LogFn = Callable[..., None]

def log_fn(logger: Logger | None) -> LogFn:
    """
    Get the log function of a logger or a no-op when no logger is given

    Args:
        logger (Logger | None): The logger passed in by the caller

    Returns:
        LogFn: A callable with the signature of Logger.log
    """
    if logger is None:
        return lambda *_args, **_kwargs: None
    return logger.log
