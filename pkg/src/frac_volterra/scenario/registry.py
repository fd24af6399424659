#!/usr/bin/env python3
"""
Problem family registry.

Builds f, k and the forcing g from small descriptors with globally
Lipschitz members, so the constants M and L are known exactly:

    f  affine:   lam x + c z + g(t)          M = max(|lam|, |c|)
       bounded:  m sin(x) + c z + g(t)       M = max(|m|, |c|)
    k  linear:   L x                         L = |L|
       bounded:  L sin(x)                    L = |L|
    g  const:    c
       power:    c (psi(t) - psi(a))^p
       ml_weight c E_alpha[kappa (psi(t) - psi(a))^alpha]

Perturbations f + eps w(t) and f + mu q0 carry the hypotheses of the
continuous and parameter dependence estimates.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from ..core.psi_core import PsiFunction
from ..core.solver import IntegralProblem, IvpProblem, Lipschitz, Problem
from ..core.special_functions import mittag_leffler
from ..errors import DomainError

F_FAMILIES = ("affine", "bounded")
K_FAMILIES = ("linear", "bounded")
G_KINDS = ("const", "power", "ml_weight")

Forcing = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ForcingSpec:
    """g(t) descriptor: kind plus value, exponent (power) and rate (ml_weight)."""

    kind: str = "const"
    value: float = 0.0
    exponent: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.kind not in G_KINDS:
            raise DomainError(f"forcing kind must be one of {G_KINDS}, got '{self.kind}'")
        if self.kind == "power" and self.exponent < 0:
            raise DomainError(f"power forcing needs exponent >= 0, got {self.exponent}")


@dataclass(frozen=True)
class RhsSpec:
    """f descriptor; `scale` is lam (affine) or m (bounded), `coupling` is c."""

    family: str = "affine"
    scale: float = 0.0
    coupling: float = 0.0
    forcing: ForcingSpec = field(default_factory=ForcingSpec)

    def __post_init__(self):
        if self.family not in F_FAMILIES:
            raise DomainError(f"f family must be one of {F_FAMILIES}, got '{self.family}'")

    @property
    def lipschitz(self) -> float:
        return max(abs(self.scale), abs(self.coupling))


@dataclass(frozen=True)
class KernelSpec:
    """k descriptor with constant `lipschitz` (L)."""

    family: str = "linear"
    lipschitz: float = 0.0

    def __post_init__(self):
        if self.family not in K_FAMILIES:
            raise DomainError(f"k family must be one of {K_FAMILIES}, got '{self.family}'")


def build_forcing(spec: ForcingSpec, psi: PsiFunction, alpha: float, a: float) -> Forcing:
    """g as a function of t."""
    if spec.kind == "const":
        return lambda t: np.full(np.shape(t), spec.value, dtype=float)

    def increments(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.maximum(psi.increment(a, t - a), 0.0)

    if spec.kind == "power":
        return lambda t: spec.value * increments(t) ** spec.exponent
    return lambda t: spec.value * np.asarray(
        mittag_leffler(alpha, spec.rate * increments(t) ** alpha), dtype=float
    )


def build_rhs(spec: RhsSpec, forcing: Forcing):
    """f(t, x, z) for arrays t (m,), x and z (m, n)."""
    scale, coupling = spec.scale, spec.coupling

    if spec.family == "affine":
        def rhs(t, x, z):
            return scale * x + coupling * z + forcing(t)[:, None]
    else:
        def rhs(t, x, z):
            return scale * np.sin(x) + coupling * z + forcing(t)[:, None]
    return rhs


def build_kernel(spec: KernelSpec):
    """k(t, s, x)."""
    strength = spec.lipschitz
    if spec.family == "linear":
        return lambda t, s, x: strength * x
    return lambda t, s, x: strength * np.sin(x)


def kernel_lipschitz(spec: KernelSpec) -> float:
    """
    Positive Lipschitz constant of k.

    k = 0 is Lipschitz with any positive constant; 1 is used then.
    """
    strength = abs(spec.lipschitz)
    return strength if strength > 0 else 1.0


def build_problem(
    f_spec: RhsSpec,
    k_spec: KernelSpec,
    alpha: float,
    psi: PsiFunction,
    a: float,
    b: float,
    dimension: int = 1,
    kind: str = "integral",
    beta: float = 1.0,
    x0: Optional[Sequence[float]] = None,
    lipschitz: Optional[Lipschitz] = None,
) -> Problem:
    """
    Assemble an IntegralProblem or IvpProblem from registry descriptors.

    `lipschitz` may declare constants larger than the family constants.

    Raises:
        DomainError: for an unknown kind or invalid parameters
    """
    forcing = build_forcing(f_spec.forcing, psi, alpha, a)
    if lipschitz is None:
        lipschitz = Lipschitz(M=f_spec.lipschitz, L=kernel_lipschitz(k_spec))
    descriptor = {
        "f": f_spec.family,
        "k": k_spec.family,
        "g": f_spec.forcing.kind,
        "psi": psi.label,
    }
    common = dict(
        f=build_rhs(f_spec, forcing),
        k=build_kernel(k_spec),
        alpha=alpha,
        psi=psi,
        a=a,
        b=b,
        lipschitz=lipschitz,
        dimension=dimension,
        descriptor=descriptor,
    )
    if kind == "integral":
        return IntegralProblem(**common)
    if kind == "ivp":
        initial = tuple(float(c) for c in (x0 if x0 is not None else [0.0] * dimension))
        return IvpProblem(**common, beta=beta, x0=initial)
    raise DomainError(f"problem kind must be 'integral' or 'ivp', got '{kind}'")


def unit_direction(t: np.ndarray, a: float, dimension: int) -> np.ndarray:
    """w(t) = cos(t - a) / sqrt(n) in every component, so ||w(t)|| <= 1."""
    t = np.asarray(t, dtype=float)
    return np.repeat((np.cos(t - a) / math.sqrt(dimension))[:, None], dimension, axis=1)


def _replace_f(problem: Problem, f, descriptor: Dict[str, Any]) -> Problem:
    common = dict(
        f=f,
        k=problem.k,
        alpha=problem.alpha,
        psi=problem.psi,
        a=problem.a,
        b=problem.b,
        lipschitz=problem.lipschitz,
        dimension=problem.dimension,
        descriptor=descriptor,
    )
    if isinstance(problem, IvpProblem):
        return IvpProblem(**common, beta=problem.beta, x0=problem.x0)
    return IntegralProblem(**common)


def perturbed(problem: Problem, epsilon: float) -> Problem:
    """Same problem with f + epsilon w(t), ||w|| <= 1."""
    base, a, n = problem.f, problem.a, problem.dimension

    def rhs(t, x, z):
        return base(t, x, z) + epsilon * unit_direction(t, a, n)

    return _replace_f(problem, rhs, {**problem.descriptor, "perturbation": epsilon})


def parametrized(problem: Problem, mu: float, direction: Sequence[float]) -> Problem:
    """Same problem with h = f + mu q0."""
    base = problem.f
    q0 = np.asarray(direction, dtype=float)
    if q0.shape != (problem.dimension,):
        raise DomainError(f"q0 needs {problem.dimension} components, got {q0.shape}")

    def rhs(t, x, z):
        return base(t, x, z) + mu * q0[None, :]

    return _replace_f(problem, rhs, {**problem.descriptor, "mu": mu})


def parameter_pair(
    problem: Problem, mu: float, mu0: float, direction: Sequence[float]
) -> Tuple[Problem, Problem]:
    """Problems at mu and mu0 sharing the same base f."""
    return parametrized(problem, mu, direction), parametrized(problem, mu0, direction)
