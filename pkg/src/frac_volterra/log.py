#!/usr/bin/env python3
"""
Package logger setup.

All modules obtain loggers through get_logger() so that a single handler
on the "frac_volterra" logger controls the output. The logger is quiet
(WARNING) until the CLI raises the level.
"""

import logging

PACKAGE_LOGGER = "frac_volterra"

_root = logging.getLogger(PACKAGE_LOGGER)
if not _root.handlers:
    _handler = logging.StreamHandler()
    _handler.setFormatter(logging.Formatter("[%(levelname)s] %(name)s: %(message)s"))
    _root.addHandler(_handler)
    _root.setLevel(logging.WARNING)


def get_logger(name: str) -> logging.Logger:
    """Return a child logger of the package logger."""
    if name.startswith(PACKAGE_LOGGER):
        return logging.getLogger(name)
    return logging.getLogger(f"{PACKAGE_LOGGER}.{name}")


def set_verbosity(verbose: bool) -> None:
    """Switch the package logger between WARNING and DEBUG."""
    _root.setLevel(logging.DEBUG if verbose else logging.WARNING)
