#!/usr/bin/env python3
"""
psi-Function and Weighted Space Module

This module provides the geometric layer shared by all operators:
- Admissible psi functions (identity, power, logarithm, exponential, custom)
- Graded grids on a finite window [a, b]
- The kernel N(t, s) = psi'(s) (psi(t) - psi(s))^(alpha - 1)
- The endpoint weight (psi(t) - psi(a))^(gamma - 1) / Gamma(gamma)
- The Mittag-Leffler weighted norm and metric of the space C_xi
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, Optional, Union

import numpy as np
from scipy.special import gamma as gamma_fn

from ..errors import DomainError
from .special_functions import mittag_leffler

if TYPE_CHECKING:
    from ..models import SolutionTrace

ArrayLike = Union[float, np.ndarray]

PSI_FAMILIES = ("identity", "power", "logarithm", "exponential", "custom")

DEFAULT_NODES = 1024
DEFAULT_GRADING = 2.0


@dataclass(frozen=True)
class PsiFunction:
    """An increasing function psi with a positive continuous derivative.

    Attributes:
        family: One of PSI_FAMILIES
        rho: Exponent of the power family psi(t) = t^rho
        sigma: Rate of the exponential family psi(t) = exp(sigma t)
        func: psi itself for the custom family
        derivative: psi' for the custom family
        name: Label used in CSV headers for the custom family
    """

    family: str = "identity"
    rho: float = 1.0
    sigma: float = 1.0
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    name: str = ""

    def __post_init__(self):
        if self.family not in PSI_FAMILIES:
            raise DomainError(f"Unknown psi family '{self.family}'")
        if self.family == "power" and not self.rho > 0:
            raise DomainError(f"power family needs rho > 0, got {self.rho}")
        if self.family == "exponential" and not self.sigma > 0:
            raise DomainError(f"exponential family needs sigma > 0, got {self.sigma}")
        if self.family == "custom" and (self.func is None or self.derivative is None):
            raise DomainError("custom psi needs both func and derivative")

    @classmethod
    def identity(cls) -> "PsiFunction":
        return cls("identity")

    @classmethod
    def power(cls, rho: float) -> "PsiFunction":
        return cls("power", rho=rho)

    @classmethod
    def logarithm(cls) -> "PsiFunction":
        return cls("logarithm")

    @classmethod
    def exponential(cls, sigma: float) -> "PsiFunction":
        return cls("exponential", sigma=sigma)

    @classmethod
    def custom(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        derivative: Callable[[np.ndarray], np.ndarray],
        name: str = "custom",
    ) -> "PsiFunction":
        return cls("custom", func=func, derivative=derivative, name=name)

    @property
    def label(self) -> str:
        """Short text form, e.g. 'power(rho=2)'."""
        if self.family == "power":
            return f"power(rho={self.rho:g})"
        if self.family == "exponential":
            return f"exponential(sigma={self.sigma:g})"
        if self.family == "custom":
            return self.name or "custom"
        return self.family

    def eval(self, t: ArrayLike) -> ArrayLike:
        """psi(t)."""
        t = np.asarray(t, dtype=float)
        if self.family == "identity":
            return t * 1.0
        if self.family == "power":
            return t**self.rho
        if self.family == "logarithm":
            return np.log(t)
        if self.family == "exponential":
            return np.exp(self.sigma * t)
        return np.asarray(self.func(t), dtype=float)

    def deriv(self, t: ArrayLike) -> ArrayLike:
        """psi'(t)."""
        t = np.asarray(t, dtype=float)
        if self.family == "identity":
            return np.ones_like(t)
        if self.family == "power":
            return self.rho * t ** (self.rho - 1.0)
        if self.family == "logarithm":
            return 1.0 / t
        if self.family == "exponential":
            return self.sigma * np.exp(self.sigma * t)
        return np.asarray(self.derivative(t), dtype=float)

    def increment(self, a: float, offset: ArrayLike) -> ArrayLike:
        """
        psi(a + offset) - psi(a), computed without cancellation.

        Args:
            a: Base point(s), broadcast against offset
            offset: Nonnegative offsets from a

        Returns:
            Increments, same shape as offset
        """
        h = np.asarray(offset, dtype=float)
        base = np.asarray(a, dtype=float)
        if self.family == "identity":
            return h * 1.0
        if self.family == "logarithm":
            return np.log1p(h / base)
        if self.family == "exponential":
            return np.exp(self.sigma * base) * np.expm1(self.sigma * h)
        if self.family == "power" and np.all(base > 0):
            return base**self.rho * np.expm1(self.rho * np.log1p(h / base))
        return self.eval(base + h) - self.eval(base)

    def check_admissible(self, a: float, b: float, samples: int = 64) -> None:
        """
        Verify psi is admissible on [a, b].

        Checks the family domain, psi' > 0 and finite at sample points, and
        that psi' matches a centered difference of psi.

        Raises:
            DomainError: if any check fails
        """
        if not b > a:
            raise DomainError(f"interval needs b > a, got [{a}, {b}]")
        if self.family == "logarithm" and not a > 0:
            raise DomainError(f"logarithm psi needs a > 0, got a = {a}")
        if self.family == "power" and a < 0:
            raise DomainError(f"power psi needs a >= 0, got a = {a}")

        t = np.linspace(a, b, samples + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.deriv(t)
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            bad = float(t[np.argmax(~np.isfinite(d) | (d <= 0))])
            raise DomainError(f"psi' = {self.label}' is not positive and finite at t = {bad:g}")

        interior = t[1:-1]
        h = 1e-5 * (b - a)
        centered = (self.eval(interior + h) - self.eval(interior - h)) / (2.0 * h)
        scale = np.maximum(1.0, np.abs(d[1:-1]))
        if np.max(np.abs(centered - d[1:-1]) / scale) > 1e-5:
            raise DomainError(f"psi' of {self.label} is inconsistent with psi")


@dataclass(frozen=True)
class WeightedSpaceParams:
    """Parameters of the weighted space C_xi on [a, b].

    Attributes:
        xi: Weight rate, xi > 0
        alpha: Order, 0 < alpha <= 1
        psi: The psi function
        a: Left endpoint
    """

    xi: float
    alpha: float
    psi: PsiFunction
    a: float

    def __post_init__(self):
        if not self.xi > 0:
            raise DomainError(f"weight rate xi must be positive, got {self.xi}")
        if not 0 < self.alpha <= 1:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing nodes a = t_0 < ... < t_N = b.

    Nodes follow t_i = a + (b - a) (i/N)^q; q = 1 is the uniform grid.
    The offsets t_i - a are stored so that psi increments keep full
    precision near a.
    """

    a: float
    b: float
    offsets: np.ndarray = field(repr=False)
    grading_q: float = 1.0

    def __post_init__(self):
        offsets = np.array(self.offsets, dtype=float)
        if not self.b > self.a:
            raise DomainError(f"grid needs b > a, got [{self.a}, {self.b}]")
        if offsets.ndim != 1 or offsets.size < 2:
            raise DomainError("grid needs at least two nodes")
        if offsets[0] != 0.0 or np.any(np.diff(offsets) <= 0):
            raise DomainError("grid offsets must start at 0 and increase strictly")
        if not math.isclose(offsets[-1], self.b - self.a, rel_tol=1e-12):
            raise DomainError("grid must end at b")
        offsets.flags.writeable = False
        nodes = self.a + offsets
        nodes[0] = self.a
        nodes[-1] = self.b
        nodes.flags.writeable = False
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "_nodes", nodes)

    @classmethod
    def build(
        cls, a: float, b: float, n: int = DEFAULT_NODES, grading_q: float = DEFAULT_GRADING
    ) -> "Grid":
        """Graded grid with n panels on [a, b]."""
        if n < 1:
            raise DomainError(f"grid needs n >= 1 panels, got {n}")
        if grading_q < 1:
            raise DomainError(f"grading exponent must be >= 1, got {grading_q}")
        fractions = np.arange(n + 1, dtype=float) / n
        offsets = (b - a) * fractions**grading_q
        offsets[-1] = b - a
        return cls(a, b, offsets, float(grading_q))

    @classmethod
    def uniform(cls, a: float, b: float, n: int = DEFAULT_NODES) -> "Grid":
        return cls.build(a, b, n, 1.0)

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def n(self) -> int:
        """Number of panels."""
        return self.offsets.size - 1

    @property
    def grading(self) -> str:
        return "uniform" if self.grading_q == 1.0 else "graded"

    def same_as(self, other: "Grid") -> bool:
        """True if both grids carry the same nodes."""
        if other is self:
            return True
        return (
            self.a == other.a
            and self.b == other.b
            and self.offsets.shape == other.offsets.shape
            and np.array_equal(self.offsets, other.offsets)
        )


@lru_cache(maxsize=64)
def psi_increments(psi: PsiFunction, grid: Grid) -> np.ndarray:
    """psi(t_i) - psi(a) at every node, read-only."""
    u = np.asarray(psi.increment(grid.a, grid.offsets), dtype=float)
    u[0] = 0.0
    if np.any(np.diff(u) <= 0):
        raise DomainError(f"psi = {psi.label} is not strictly increasing on the grid")
    u.flags.writeable = False
    return u


def kernel_N(psi: PsiFunction, alpha: float, t: float, s: ArrayLike) -> ArrayLike:
    """
    N(t, s) = psi'(s) (psi(t) - psi(s))^(alpha - 1).

    Args:
        psi: The psi function
        alpha: Order, 0 < alpha <= 1
        t: Upper point
        s: Lower point(s), s < t

    Raises:
        DomainError: for s >= t or alpha outside (0, 1]
    """
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr >= t):
        raise DomainError("kernel N(t, s) needs s < t")
    gap = psi.increment(s_arr, t - s_arr)
    value = psi.deriv(s_arr) * gap ** (alpha - 1.0)
    return float(value) if value.ndim == 0 else value


def psi_gamma_weight(psi: PsiFunction, gamma: float, t: ArrayLike, a: float) -> ArrayLike:
    """
    (psi(t) - psi(a))^(gamma - 1) / Gamma(gamma).

    Raises:
        DomainError: for t <= a or gamma outside (0, 1]
    """
    if not 0 < gamma <= 1:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= a):
        raise DomainError("endpoint weight needs t > a")
    if gamma == 1.0:
        value = np.ones_like(t_arr)
    else:
        value = psi.increment(a, t_arr - a) ** (gamma - 1.0) / gamma_fn(gamma)
    return float(value) if value.ndim == 0 else value


def endpoint_weight_on_grid(psi: PsiFunction, gamma: float, grid: Grid) -> np.ndarray:
    """psi_gamma_weight at every node; node 0 holds 0 when gamma < 1."""
    out = np.ones(grid.n + 1)
    if gamma < 1.0:
        u = psi_increments(psi, grid)
        out[0] = 0.0
        out[1:] = u[1:] ** (gamma - 1.0) / gamma_fn(gamma)
    return out


@lru_cache(maxsize=64)
def space_weights(w: WeightedSpaceParams, grid: Grid) -> np.ndarray:
    """E_alpha[xi (psi(t_i) - psi(a))^alpha] at every node, read-only."""
    if w.a != grid.a:
        raise DomainError(f"weighted space starts at {w.a}, grid at {grid.a}")
    u = psi_increments(w.psi, grid)
    weights = np.asarray(mittag_leffler(w.alpha, w.xi * u**w.alpha), dtype=float)
    weights.flags.writeable = False
    return weights


def weighted_norm(x: "SolutionTrace", w: WeightedSpaceParams) -> float:
    """
    ||x||_{xi,inf} = max_i ||x(t_i)|| / E_alpha[xi (psi(t_i) - psi(a))^alpha].

    The singular endpoint of a trace is skipped.

    Raises:
        DomainError: for an empty trace or a grid not starting at w.a
    """
    if x.values.size == 0:
        raise DomainError("weighted norm of an empty trace")
    weights = space_weights(w, x.grid)
    mask = x.included_mask()
    ratios = x.norms()[mask] / weights[mask]
    return float(np.max(ratios))


def weighted_metric(x: "SolutionTrace", y: "SolutionTrace", w: WeightedSpaceParams) -> float:
    """
    d_{xi,inf}(x, y) = ||x - y||_{xi,inf}.

    Raises:
        DomainError: if the traces live on different grids
    """
    return weighted_norm(x.difference(y), w)
