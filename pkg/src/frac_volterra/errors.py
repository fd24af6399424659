#!/usr/bin/env python3
"""
Exception hierarchy for frac_volterra.

Library code raises these; the scenario runner turns them into
(success, message, details) results and process exit codes.
"""


class FracVolterraError(Exception):
    """Base class for all package errors."""


class DomainError(FracVolterraError, ValueError):
    """An argument lies outside the domain of an operation."""


class MittagLefflerOverflow(FracVolterraError, OverflowError):
    """E_alpha(z) is too large to represent as a float."""

    def __init__(self, alpha: float, z: float):
        super().__init__(
            f"Mittag-Leffler E_{alpha:g}({z:g}) overflows double precision"
        )
        self.alpha = alpha
        self.z = z


class DivergenceError(FracVolterraError, RuntimeError):
    """Picard iteration produced non-finite values."""

    def __init__(self, iteration: int, message: str = ""):
        text = f"Picard iteration diverged at iteration {iteration}"
        if message:
            text += f": {message}"
        super().__init__(text)
        self.iteration = iteration


class ConfigError(FracVolterraError, ValueError):
    """Invalid scenario configuration; `field` is the dotted key path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
