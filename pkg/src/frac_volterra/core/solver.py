#!/usr/bin/env python3
"""
Picard Solver Module

This module solves, on a grid, by fixed-point iteration in the weighted
space C_xi:
- Integral equations  x(t) = f(t, x(t), I^{alpha,psi} k(t, ., x(.)))
- psi-Hilfer initial-value problems in their integral form
      x(t) = Psi^gamma(t, a) x0 + I^{alpha,psi} f(., x, I^{alpha,psi} k)
and issues the contraction certificate (M, L, delta, xi, q) with the
start-distance estimate d.

Callables follow one broadcasting convention:
- f(t, x, z): t of shape (m,), x and z of shape (m, n); returns (m, n)
- k(t, s, x): t and s broadcast against each other and against the
  leading axes of x, whose last axis has length n; returns an array that
  broadcasts to that shape
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np

from ..errors import DivergenceError, DomainError
from ..log import get_logger
from ..models import ContractionCertificate, SolutionTrace
from .frac_calculus import product_weights
from .psi_core import (
    DEFAULT_GRADING,
    Grid,
    PsiFunction,
    WeightedSpaceParams,
    endpoint_weight_on_grid,
    space_weights,
    weighted_metric,
)

logger = get_logger(__name__)

RightHandSide = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
Kernel = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
DEFAULT_DELTA = 2.0
CERTIFICATE_NODES = 256


@dataclass(frozen=True)
class Lipschitz:
    """Lipschitz constants: M for f (both slots), L for k."""

    M: float
    L: float

    def __post_init__(self):
        if not self.M >= 0:
            raise DomainError(f"Lipschitz constant M must be nonnegative, got {self.M}")
        if not self.L > 0:
            raise DomainError(f"Lipschitz constant L must be positive, got {self.L}")


@dataclass(frozen=True, eq=False)
class IntegralProblem:
    """x(t) = f(t, x(t), (1/Gamma(alpha)) int_a^t N(t, s) k(t, s, x(s)) ds) on [a, b]."""

    f: RightHandSide
    k: Kernel
    alpha: float
    psi: PsiFunction
    a: float
    b: float
    lipschitz: Lipschitz
    dimension: int = 1
    descriptor: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.dimension < 1:
            raise DomainError(f"dimension must be at least 1, got {self.dimension}")
        if not self.b > self.a:
            raise DomainError(f"interval needs b > a, got [{self.a}, {self.b}]")

    @property
    def kind(self) -> str:
        return "integral"

    @property
    def gamma(self) -> float:
        return 1.0

    @property
    def singular(self) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class IvpProblem(IntegralProblem):
    """psi-Hilfer problem D^{alpha,beta;psi} x = f(t, x, I k), I^{1-gamma,psi} x(a) = x0."""

    beta: float = 1.0
    x0: Tuple[float, ...] = (0.0,)

    def __post_init__(self):
        super().__post_init__()
        if not 0 <= self.beta <= 1:
            raise DomainError(f"beta must lie in [0, 1], got {self.beta}")
        if len(self.x0) != self.dimension:
            raise DomainError(
                f"x0 has {len(self.x0)} components, problem dimension is {self.dimension}"
            )

    @property
    def kind(self) -> str:
        return "ivp"

    @property
    def gamma(self) -> float:
        return self.alpha + self.beta * (1.0 - self.alpha)

    @property
    def singular(self) -> bool:
        return self.gamma < 1.0

    @property
    def endpoint_exponent(self) -> Optional[float]:
        return self.gamma - 1.0 if self.singular else None


Problem = Union[IntegralProblem, IvpProblem]


def space_for(problem: Problem, delta: float = DEFAULT_DELTA) -> WeightedSpaceParams:
    """Weighted space with xi = L * delta."""
    return WeightedSpaceParams(problem.lipschitz.L * delta, problem.alpha, problem.psi, problem.a)


def _check_trace(problem: Problem, x: SolutionTrace) -> None:
    if x.grid.a != problem.a or x.grid.b != problem.b:
        raise DomainError(
            f"trace lives on [{x.grid.a}, {x.grid.b}], problem on [{problem.a}, {problem.b}]"
        )
    if x.dimension != problem.dimension:
        raise DomainError(
            f"trace has {x.dimension} components, problem dimension is {problem.dimension}"
        )


def _exponent(problem: Problem) -> Optional[float]:
    return problem.endpoint_exponent if isinstance(problem, IvpProblem) else None


def _weights(problem: Problem, grid: Grid) -> np.ndarray:
    return product_weights(grid, problem.psi, problem.alpha, _exponent(problem))


def inner_integral(problem: Problem, x: SolutionTrace, weights: np.ndarray) -> np.ndarray:
    """z(t_i) = sum_j W[i, j] k(t_i, t_j, x(t_j)), shape (N + 1, n)."""
    nodes = x.grid.nodes
    size, n = x.values.shape
    kernel = problem.k(nodes[:, None], nodes[None, :], x.values[None, :, :])
    kernel = np.broadcast_to(np.asarray(kernel, dtype=float), (size, size, n))
    return np.einsum("ij,ijn->in", weights, kernel)


def _evaluate_f(problem: Problem, nodes: np.ndarray, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    out = np.asarray(problem.f(nodes, x, z), dtype=float)
    return np.broadcast_to(out, x.shape).copy()


def apply_T(problem: IntegralProblem, x: SolutionTrace) -> SolutionTrace:
    """
    (Tx)(t_i) = f(t_i, x(t_i), z(t_i)) with the inner product-integral z.

    Raises:
        DomainError: if x does not live on the problem's interval
    """
    _check_trace(problem, x)
    weights = product_weights(x.grid, problem.psi, problem.alpha)
    z = inner_integral(problem, x, weights)
    return SolutionTrace(x.grid, _evaluate_f(problem, x.grid.nodes, x.values, z))


def apply_S(problem: IvpProblem, x: SolutionTrace) -> SolutionTrace:
    """
    (Sx)(t_i) = Psi^gamma(t_i, a) x0 + I^{alpha,psi} f(., x, z)(t_i).

    For gamma < 1 node 0 is a placeholder and first panels are integrated
    against the (psi(t) - psi(a))^(gamma - 1) profile.
    """
    _check_trace(problem, x)
    grid = x.grid
    weights = _weights(problem, grid)
    z = inner_integral(problem, x, weights)
    forcing = _evaluate_f(problem, grid.nodes, x.values, z)

    endpoint = endpoint_weight_on_grid(problem.psi, problem.gamma, grid)
    values = endpoint[:, None] * np.asarray(problem.x0, dtype=float)[None, :] + weights @ forcing
    if problem.singular:
        values[0] = 0.0
    return SolutionTrace(grid, values, problem.singular, _exponent(problem))


def _operator(problem: Problem) -> Callable[[SolutionTrace], SolutionTrace]:
    if isinstance(problem, IvpProblem):
        return lambda x: apply_S(problem, x)
    return lambda x: apply_T(problem, x)


def _picard(
    problem: Problem,
    start: SolutionTrace,
    tol: float,
    max_iter: int,
    delta: float,
) -> SolutionTrace:
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    if max_iter < 1:
        raise DomainError(f"max_iter must be at least 1, got {max_iter}")

    space = space_for(problem, delta)
    operator = _operator(problem)
    current = start
    history = []
    converged = False

    for iteration in range(1, max_iter + 1):
        following = operator(current)
        if not np.all(np.isfinite(following.values[following.included_mask()])):
            raise DivergenceError(iteration, "non-finite values in the Picard iterate")
        distance = weighted_metric(following, current, space)
        if not math.isfinite(distance):
            raise DivergenceError(iteration, "non-finite weighted distance")
        history.append(distance)
        current = following
        logger.debug("Picard sweep %d: d = %.3e", iteration, distance)
        if distance < tol:
            converged = True
            break

    final_residual = weighted_metric(current, operator(current), space)
    if converged:
        logger.info("Picard converged in %d iterations (residual %.3e)", len(history), final_residual)
    else:
        logger.warning("Picard stopped after %d iterations without meeting tol %g", max_iter, tol)

    current.history = history
    current.iterations = len(history)
    current.converged = converged
    current.residual = final_residual
    return current


def picard_solve_integral(
    problem: IntegralProblem,
    grid: Grid,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    delta: float = DEFAULT_DELTA,
) -> SolutionTrace:
    """
    Iterate x <- Tx from x(t) = f(t, 0, 0).

    Stops when d_{xi,inf}(x_{k+1}, x_k) < tol or after max_iter sweeps;
    reaching max_iter is reported through `converged`, not raised.

    Raises:
        DivergenceError: if an iterate becomes non-finite
    """
    zeros = np.zeros((grid.n + 1, problem.dimension))
    start = SolutionTrace(grid, _evaluate_f(problem, grid.nodes, zeros, zeros))
    _check_trace(problem, start)
    return _picard(problem, start, tol, max_iter, delta)


def picard_solve_ivp(
    problem: IvpProblem,
    grid: Grid,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    delta: float = DEFAULT_DELTA,
) -> SolutionTrace:
    """
    Iterate x <- Sx from x(t) = Psi^gamma(t, a) x0.

    For gamma < 1 the returned trace has singular_endpoint set and its
    distances skip node 0.
    """
    endpoint = endpoint_weight_on_grid(problem.psi, problem.gamma, grid)
    values = endpoint[:, None] * np.asarray(problem.x0, dtype=float)[None, :]
    start = SolutionTrace(grid, values, problem.singular, _exponent(problem))
    _check_trace(problem, start)
    return _picard(problem, start, tol, max_iter, delta)


def solve(problem: Problem, grid: Grid, **options) -> SolutionTrace:
    """Dispatch to the Picard solver matching the problem kind."""
    if isinstance(problem, IvpProblem):
        return picard_solve_ivp(problem, grid, **options)
    return picard_solve_integral(problem, grid, **options)


def start_distance(problem: Problem, grid: Grid, delta: float = DEFAULT_DELTA) -> Tuple[float, float, bool]:
    """
    Weighted size of the operator image of x = 0.

    Returns:
        (value, node, finite): d1 for integral problems, d2 for IVPs, the
        node attaining it and whether the continuum supremum is finite
    """
    zero = SolutionTrace(grid, np.zeros((grid.n + 1, problem.dimension)))
    image = _operator(problem)(zero)
    weights = space_weights(space_for(problem, delta), grid)
    mask = image.included_mask()
    ratios = np.where(mask, image.norms() / weights, -np.inf)
    index = int(np.argmax(ratios))
    value = float(ratios[index])

    finite = math.isfinite(value)
    if isinstance(problem, IvpProblem) and problem.singular and any(c != 0.0 for c in problem.x0):
        # Psi^gamma x0 is unbounded at a
        finite = False
    return value, float(grid.nodes[index]), finite


def contraction_certificate(
    problem: Problem, delta: float = DEFAULT_DELTA, grid: Optional[Grid] = None
) -> ContractionCertificate:
    """
    Certificate of the weighted-space contraction argument.

    q_integral = M (1 + 1/delta) and q_ivp = (M / xi)(1 + 1/delta) with
    xi = L delta. The start distance d is estimated on `grid` (a default
    graded grid when omitted).

    Raises:
        DomainError: if delta <= 1
    """
    if not delta > 1:
        raise DomainError(f"delta must exceed 1, got {delta}")
    M, L = problem.lipschitz.M, problem.lipschitz.L
    xi = L * delta
    if grid is None:
        grid = Grid.build(problem.a, problem.b, CERTIFICATE_NODES, DEFAULT_GRADING)

    d_value, d_node, d_finite = start_distance(problem, grid, delta)
    certificate = ContractionCertificate(
        M=M,
        L=L,
        delta=delta,
        xi=xi,
        q_integral=M * (1.0 + 1.0 / delta),
        q_ivp=(M / xi) * (1.0 + 1.0 / delta),
        d_value=d_value,
        d_node=d_node,
        d_finite=d_finite,
    )
    contractive = (
        certificate.contractive_ivp if isinstance(problem, IvpProblem)
        else certificate.contractive_integral
    )
    if not contractive:
        logger.warning("Certificate is not contractive for the %s problem", problem.kind)
    return certificate


def residual(problem: Problem, x: SolutionTrace, delta: float = DEFAULT_DELTA) -> float:
    """d_{xi,inf}(x, Tx), or x against its S-image for an IVP."""
    return weighted_metric(x, _operator(problem)(x), space_for(problem, delta))


def spot_check_lipschitz(
    problem: Problem, samples: int = 64, seed: int = 0, scale: float = 3.0
) -> Dict[str, Any]:
    """
    Test the declared Lipschitz constants on random triples.

    Returns:
        Dict with 'holds' and the worst observed ratios 'f_ratio', 'k_ratio'
        (observed difference over declared bound)
    """
    rng = np.random.default_rng(seed)
    n = problem.dimension
    M, L = problem.lipschitz.M, problem.lipschitz.L

    t = rng.uniform(problem.a, problem.b, samples)
    s = problem.a + (t - problem.a) * rng.uniform(0.0, 1.0, samples)
    u, u_bar, v, v_bar = (rng.normal(0.0, scale, (samples, n)) for _ in range(4))

    f_diff = np.linalg.norm(
        _evaluate_f(problem, t, u, v) - _evaluate_f(problem, t, u_bar, v_bar), axis=1
    )
    f_bound = M * (np.linalg.norm(u - u_bar, axis=1) + np.linalg.norm(v - v_bar, axis=1))

    k_shape = (samples, 1, n)
    k_diff = np.asarray(problem.k(t[:, None], s[:, None], u[:, None, :]), dtype=float)
    k_diff = np.broadcast_to(k_diff, k_shape) - np.broadcast_to(
        np.asarray(problem.k(t[:, None], s[:, None], u_bar[:, None, :]), dtype=float), k_shape
    )
    k_diff = np.linalg.norm(k_diff.reshape(samples, n), axis=1)
    k_bound = L * np.linalg.norm(u - u_bar, axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        f_ratio = float(np.max(np.where(f_bound > 0, f_diff / f_bound, np.where(f_diff > 0, np.inf, 0.0))))
        k_ratio = float(np.max(np.where(k_bound > 0, k_diff / k_bound, np.where(k_diff > 0, np.inf, 0.0))))

    holds = f_ratio <= 1.0 + 1e-9 and k_ratio <= 1.0 + 1e-9
    if not holds:
        logger.warning(
            "Lipschitz spot check failed: f ratio %.3g, k ratio %.3g", f_ratio, k_ratio
        )
    return {"holds": holds, "f_ratio": f_ratio, "k_ratio": k_ratio, "samples": samples}
