"""
Logging utilities
"""

from datetime import datetime as dt
import sys
from typing import Any, Callable, Iterable, TextIO

from .types import Logger

__all__ = [
    'PrintLogger',
    'BufferedLogger',
]

def _format(
    msgs: tuple[Any, ...],
    sep: str,
    end: str,
    level: str | None,
    time_fmt: str | None
) -> str:
    time = (dt.now().strftime(time_fmt) + ' ') if time_fmt is not None else ''
    log_level = f'[{level}]: ' if level is not None else ''
    return time + log_level + sep.join(str(msg) for msg in msgs) + end

class PrintLogger(Logger):
    """
    Logger that prints to a text stream

    Args:
        default_log_level (optional str | None default: None): The default log level to use
        default_time_fmt (optional str | None default: None): The default strftime format to prefix
        messages with
        min_level (optional str default: 'INFO'): Messages below this level are dropped
        stream (optional TextIO | None default: None): Where to print, stderr if not present
    """

    _ORDER: dict[str, int] = {'DEBUG': 0, 'INFO': 1, 'WARNING': 2, 'ERROR': 3}

    def __init__(
        self,
        default_log_level: str | None = None,
        default_time_fmt: str | None = None,
        min_level: str = 'INFO',
        stream: TextIO | None = None
    ) -> None:
        self._default_log_level: str | None = default_log_level
        self._default_time_fmt: str | None = default_time_fmt
        self._min_level: int = self._ORDER.get(min_level, 1)
        self._stream: TextIO | None = stream

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
            msgs (*Any): The message(s) to log
            sep (optional str default: ' '): The separator to use when joining the messages
            end (optional str default: '\n'): String to append to the end of the message
            level (optional str | None default: None): The log level of the message
            time_fmt (optional str | None default: None): strftime format overriding the default
            flush (optional bool default: False): Whether to flush the stream after logging
        """
        level = level or self._default_log_level
        if level is not None and self._ORDER.get(level, 1) < self._min_level:
            return
        stream = self._stream or sys.stderr
        stream.write(_format(msgs, sep, end, level, time_fmt or self._default_time_fmt))
        if flush:
            stream.flush()

    def flush(self, _suppress_errors: bool | None = None) -> None:
        """
        Flush the underlying stream
        """
        (self._stream or sys.stderr).flush()

class BufferedLogger(Logger):
    """
    Logger that buffers lines until flushed and then hands every line to generic callbacks

    Args:
        default_log_level (optional str | None default: None): The default log level to use
        default_time_fmt (optional str | None default: None): The default strftime format to prefix
        messages with
        buffer_size (optional int | None default: None): The number of lines to buffer before
        automatically flushing, None to only flush on request
        callbacks (optional Iterable[Callable[[str], None]] default: ()): Callbacks to call with each
        line when flushing
        suppress_errors (optional bool default: False): If True errors raised by callbacks are
        suppressed so every callback is called
    """

    def __init__(
        self,
        default_log_level: str | None = None,
        default_time_fmt: str | None = None,
        buffer_size: int | None = None,
        callbacks: Iterable[Callable[[str], None]] = (),
        suppress_errors: bool = False
    ) -> None:
        self._log_level: str | None = default_log_level
        self._time_fmt: str | None = default_time_fmt
        self._buffer_size: int | None = buffer_size
        self._callbacks: list[Callable[[str], None]] = [*callbacks]
        self._suppress_errors: bool = suppress_errors
        self._logs: list[str] = []
        self.lines: list[str] = []

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
        Buffer a message

        Args:
            msgs (*Any): The message(s) to log
            sep (optional str default: ' '): The separator to use when joining the messages
            end (optional str default: '\n'): String to append to the end of the message
            level (optional str | None default: None): The log level of the message
            time_fmt (optional str | None default: None): strftime format overriding the default
            flush (optional bool default: False): Whether to flush the logs after logging the
            message
        """
        msg = _format(msgs, sep, end, level or self._log_level, time_fmt or self._time_fmt)
        self._logs.append(msg)
        if flush or (self._buffer_size is not None and len(self._logs) >= self._buffer_size):
            self.flush()

    def flush(self, suppress_errors: bool | None = None) -> None:
        """
        Hand all buffered lines to the callbacks and clear the buffer

        Args:
            suppress_errors (optional bool | None default: None): If True errors raised by callbacks
            will be suppressed. If not present the value set in the constructor will be used
        """
        suppress_errors = suppress_errors if suppress_errors is not None else self._suppress_errors
        for log in self._logs:
            self.lines.append(log)
            for callback in self._callbacks:
                try:
                    callback(log)
                except Exception as err: #pylint: disable=broad-exception-caught
                    if not suppress_errors:
                        raise err
        self._logs.clear()

    def text(self) -> str:
        """
        Everything logged so far, flushed or not
        """
        return ''.join(self.lines + self._logs)
