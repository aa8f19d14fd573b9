from __future__ import annotations

import os
import logging
from contextlib import contextmanager
from typing import Optional

FORMAT = "%(levelname)10s:\t\t%(message)s"


def set_logging(
    name: str = "hardy_lab",
    level=logging.INFO,
    to_console: bool = True,
    path_log: str = "",
    append_to_file: bool = False,
) -> logging.Logger:
    """
    Configure the package logger.

    INFO records print bare (stage progress, fitted constants), anything
    else carries its level name. The logger does not propagate, so
    importing hardy_lab leaves the root logger of the host alone.

    Parameters
    ----------
    name : str
        Logger name.
    level : int
        Logging level.
    to_console : bool, default True
        Attach a stderr stream handler.
    path_log : str, optional
        Also write the log to this file.
    append_to_file : bool, default False
        Keep an existing log file and append to it.

    Returns
    -------
    logging.Logger
    """
    log_out = logging.getLogger(name)
    if to_console and not any(isinstance(hi, HardyLabStreamHandler) for hi in log_out.handlers):
        hConsole = HardyLabStreamHandler()
        hConsole.setFormatter(HardyLabFormatting())
        log_out.addHandler(hConsole)
    if path_log != "":
        add_file_handler(log_out, path_log, append_to_file=append_to_file)

    log_out.setLevel(level)
    log_out.propagate = False
    return log_out


def add_file_handler(logger: logging.Logger, path_log: str, append_to_file: bool = False) -> logging.Handler:
    """Mirror a logger into a file with every record prefixed by its level."""
    if not append_to_file and os.path.isfile(path_log):
        os.remove(path_log)
    directory = os.path.dirname(path_log)
    if directory != "":
        os.makedirs(directory, exist_ok=True)
    hFile = logging.FileHandler(path_log, mode="a", encoding="utf-8")
    hFile.setFormatter(logging.Formatter(FORMAT))
    logger.addHandler(hFile)
    return hFile


class HardyLabStreamHandler(logging.StreamHandler):
    pass


class HardyLabFormatting(logging.Formatter):
    info_fmt = logging.Formatter("%(message)s")
    default_fmt = logging.Formatter(FORMAT)

    def format(self, record):
        if record.levelno == logging.INFO:
            return self.info_fmt.format(record)
        else:
            return self.default_fmt.format(record)


@contextmanager
def run_with_temporary_logging(logger: logging.Logger, level: Optional[int] = None):
    """Handlers added inside the block are closed and removed on exit; the level is restored."""
    #   Save current state
    original_level = logger.level
    original_handlers = logger.handlers.copy()
    original_disabled = logger.disabled
    if level is not None:
        logger.setLevel(level)

    try:
        yield logger
    finally:
        for handi in logger.handlers:
            if handi not in original_handlers:
                handi.close()
        logger.setLevel(original_level)
        logger.handlers = original_handlers
        logger.disabled = original_disabled
