#!/usr/bin/env python3
"""
Solution Estimate Module

This module turns problem constants into certified bound curves:
- A-priori estimates of integral and initial-value solutions
- Continuous dependence on perturbations of f
- Dependence on a scalar parameter mu
and checks solved traces against them.

Every curve delegates to the Gronwall bounds: the integral-equation forms
are Mittag-Leffler bounds, the initial-value forms nested ones.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.special import gamma as gamma_fn

from ..errors import DomainError
from ..log import get_logger
from ..models import BoundCheck, BoundCurve, SolutionTrace
from .frac_calculus import integrate
from .gronwall import GronwallData, ml_bound, nested_ml_bound
from .psi_core import Grid, PsiFunction, psi_increments
from .solver import IvpProblem, Problem, apply_S, apply_T

logger = get_logger(__name__)

RELATIVE_SLACK = 1e-9
ABSOLUTE_SLACK = 1e-12


@dataclass
class EstimateInputs:
    """Constants of the solution and dependence estimates.

    Attributes:
        N_const: Lipschitz-type constant N, 0 <= N < 1 for the integral forms
        C1: sup ||f(t, 0, z0(t))|| for integral problems
        C2: sup ||Psi^gamma x0 + I^alpha f(., 0, z0)|| for initial-value problems
        p: Coefficient samples of the initial-value forms, shape (N + 1,)
        r: Kernel samples on the grid triangle, shape (N + 1, N + 1)
        epsilon1, epsilon2: Perturbation sizes (integral / initial-value)
        Q, Q_bar: Bound of q and of I^alpha q
        mu, mu0: Parameter values being compared
        N_bar: N of the parametrized problem
        p_bar, r_bar: p and r of the parametrized problem (default p, r)
        q_fun: Samples of q(t)
        report: Nodes attaining suprema and finiteness flags
    """

    N_const: float = 0.0
    C1: float = 0.0
    C2: float = 0.0
    p: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    epsilon1: float = 0.0
    epsilon2: float = 0.0
    Q: float = 0.0
    Q_bar: float = 0.0
    mu: float = 0.0
    mu0: float = 0.0
    N_bar: float = 0.0
    p_bar: Optional[np.ndarray] = None
    r_bar: Optional[np.ndarray] = None
    q_fun: Optional[np.ndarray] = None
    report: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("N_const", "C1", "C2", "epsilon1", "epsilon2", "Q", "Q_bar", "N_bar"):
            value = getattr(self, name)
            if not value >= 0:
                raise DomainError(f"{name} must be nonnegative, got {value}")


def _profiles(inputs: EstimateInputs, grid: Grid, bar: bool = False):
    size = grid.n + 1
    p = inputs.p_bar if bar and inputs.p_bar is not None else inputs.p
    r = inputs.r_bar if bar and inputs.r_bar is not None else inputs.r
    p = np.zeros(size) if p is None else np.broadcast_to(np.asarray(p, dtype=float), (size,))
    r = np.zeros((size, size)) if r is None else np.broadcast_to(np.asarray(r, dtype=float), (size, size))
    return np.array(p), np.array(r)


def _integral_form(
    scale: float, n_const: float, r: np.ndarray, psi: PsiFunction, alpha: float, grid: Grid
) -> np.ndarray:
    """(scale / (1 - N)) E_alpha[(N / (1 - N)) r(t, t) U^alpha] via ml_bound."""
    if not n_const < 1:
        raise DomainError(f"the estimate needs N < 1, got N = {n_const}")
    size = grid.n + 1
    data = GronwallData(
        grid, psi, alpha,
        v=np.full(size, scale / (1.0 - n_const)),
        g=np.full(size, n_const / ((1.0 - n_const) * gamma_fn(alpha))),
        r=r,
    )
    return ml_bound(data).values


def _ivp_form(
    scale: float, p: np.ndarray, r: np.ndarray, psi: PsiFunction, alpha: float, grid: Grid
) -> np.ndarray:
    size = grid.n + 1
    data = GronwallData(
        grid, psi, alpha,
        v=np.zeros(size), g=np.zeros(size), r=r,
        p=p, g_tilde=np.full(size, scale),
    )
    return nested_ml_bound(data).values


def _curve(grid: Grid, values: np.ndarray, provenance: str, **metadata) -> BoundCurve:
    curve = BoundCurve(grid, values, provenance, metadata=metadata)
    logger.debug("%s bound: max %.6g", provenance, float(np.max(values)))
    return curve


def apriori_bound_integral(inputs: EstimateInputs, psi: PsiFunction, alpha: float, grid: Grid) -> BoundCurve:
    """||x(t)|| <= (C1 / (1 - N)) E_alpha[(N / (1 - N)) r(t, t) (psi(t) - psi(a))^alpha]."""
    _, r = _profiles(inputs, grid)
    values = _integral_form(inputs.C1, inputs.N_const, r, psi, alpha, grid)
    return _curve(grid, values, "apriori-integral", C1=inputs.C1, N=inputs.N_const)


def apriori_bound_ivp(inputs: EstimateInputs, psi: PsiFunction, alpha: float, grid: Grid) -> BoundCurve:
    """||x(t)|| <= C2 E_alpha{p Gamma(alpha) E_alpha[r(t, t) Gamma(alpha) U^alpha] U^alpha}."""
    p, r = _profiles(inputs, grid)
    values = _ivp_form(inputs.C2, p, r, psi, alpha, grid)
    return _curve(grid, values, "apriori-ivp", C2=inputs.C2)


def dependence_bound_integral(inputs: EstimateInputs, psi: PsiFunction, alpha: float, grid: Grid) -> BoundCurve:
    """||x - y|| <= (eps1 / (1 - N)) E_alpha[(N / (1 - N)) r(t, t) (psi(t) - psi(a))^alpha]."""
    _, r = _profiles(inputs, grid)
    values = _integral_form(inputs.epsilon1, inputs.N_const, r, psi, alpha, grid)
    # increments are taken from psi(a), recorded as lower_point
    return _curve(
        grid, values, "dependence-integral",
        epsilon1=inputs.epsilon1, N=inputs.N_const, lower_point="a",
    )


def dependence_bound_ivp(inputs: EstimateInputs, psi: PsiFunction, alpha: float, grid: Grid) -> BoundCurve:
    """||x - y|| <= eps2 times the nested Mittag-Leffler shape."""
    p, r = _profiles(inputs, grid)
    values = _ivp_form(inputs.epsilon2, p, r, psi, alpha, grid)
    return _curve(grid, values, "dependence-ivp", epsilon2=inputs.epsilon2)


def parameter_dependence_integral(inputs: EstimateInputs, psi: PsiFunction, alpha: float, grid: Grid) -> BoundCurve:
    """||z1 - z2|| <= (Q |mu - mu0| / (1 - N_bar)) E_alpha[(N_bar / (1 - N_bar)) r_bar(t, t) U^alpha]."""
    _, r_bar = _profiles(inputs, grid, bar=True)
    gap = abs(inputs.mu - inputs.mu0)
    values = _integral_form(inputs.Q * gap, inputs.N_bar, r_bar, psi, alpha, grid)
    return _curve(grid, values, "parameter-integral", Q=inputs.Q, gap=gap, N_bar=inputs.N_bar)


def parameter_dependence_ivp(
    inputs: EstimateInputs,
    psi: PsiFunction,
    alpha: float,
    grid: Grid,
    use_q_bar: bool = True,
) -> BoundCurve:
    """
    ||z1 - z2|| <= K |mu - mu0| times the nested shape with p_bar, r_bar.

    The hypothesis bounds I^alpha q by Q_bar while the printed conclusion
    carries Q; K = Q_bar when use_q_bar is set, else Q. The metadata flags
    the two constants whenever they differ.
    """
    p_bar, r_bar = _profiles(inputs, grid, bar=True)
    gap = abs(inputs.mu - inputs.mu0)
    constant = inputs.Q_bar if use_q_bar else inputs.Q
    values = _ivp_form(constant * gap, p_bar, r_bar, psi, alpha, grid)
    return _curve(
        grid, values, "parameter-ivp",
        Q=inputs.Q, Q_bar=inputs.Q_bar, gap=gap, constant_used="Q_bar" if use_q_bar else "Q",
        q_discrepancy=not math.isclose(inputs.Q, inputs.Q_bar),
    )


def check_bound(trace: SolutionTrace, bound: BoundCurve) -> BoundCheck:
    """
    Compare ||trace(t_i)|| with bound(t_i) at every included node.

    A node passes if ||trace|| <= bound (1 + 1e-9) + 1e-12. The singular
    endpoint of the trace and nodes the bound does not assert are skipped;
    with no node left, worst_margin and worst_node are nan.

    Raises:
        DomainError: if trace and bound live on different grids
    """
    if not trace.grid.same_as(bound.grid):
        raise DomainError("trace and bound live on different grids")

    mask = trace.included_mask() & bound.include
    norms = trace.norms()
    limit = bound.values * (1.0 + RELATIVE_SLACK) + ABSOLUTE_SLACK
    passed = norms <= limit
    violations = int(np.sum(~passed & mask))
    if not np.any(mask):
        logger.warning("%s bound asserts no node of the trace", bound.provenance)
        return BoundCheck(True, math.nan, math.nan, 0)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(bound.values > 0, norms / bound.values, np.where(norms > 0, np.inf, 0.0))
    ratios = np.where(mask, ratios, -np.inf)
    index = int(np.argmax(ratios))

    holds = violations == 0
    if not holds:
        logger.warning(
            "%s bound fails at %d nodes (worst ratio %.6g at t = %.6g)",
            bound.provenance, violations, ratios[index], trace.grid.nodes[index],
        )
    return BoundCheck(
        holds, float(ratios[index]), float(trace.grid.nodes[index]), violations, int(np.sum(mask))
    )


def _supremum(values: np.ndarray, mask: np.ndarray, nodes: np.ndarray):
    norms = np.where(mask, np.linalg.norm(values, axis=1), -np.inf)
    index = int(np.argmax(norms))
    return float(norms[index]), float(nodes[index])


def estimate_inputs(
    problem: Problem,
    grid: Grid,
    epsilon: float = 0.0,
    mu: float = 0.0,
    mu0: float = 0.0,
    direction=None,
) -> EstimateInputs:
    """
    Estimate constants of a registry problem on a grid.

    N = M, p = M and r = L come from the Lipschitz metadata. C1 and C2 are
    grid suprema; epsilon1 = epsilon, epsilon2 = sup I^alpha(epsilon), and
    Q = ||q0||, Q_bar = sup I^alpha Q for the f + mu q0 form.
    """
    size = grid.n + 1
    M, L = problem.lipschitz.M, problem.lipschitz.L
    nodes = grid.nodes
    zero = SolutionTrace(grid, np.zeros((size, problem.dimension)))
    report: Dict[str, Any] = {}

    if isinstance(problem, IvpProblem):
        image = apply_S(problem, zero)
        C2, node = _supremum(image.values, image.included_mask(), nodes)
        report["C2_node"] = node
        report["C2_finite"] = math.isfinite(C2) and not (
            problem.singular and any(c != 0.0 for c in problem.x0)
        )
        C1 = 0.0
    else:
        image = apply_T(problem, zero)
        C1, node = _supremum(image.values, image.included_mask(), nodes)
        report["C1_node"] = node
        report["C1_finite"] = math.isfinite(C1)
        C2 = 0.0

    u = psi_increments(problem.psi, grid)
    ones = SolutionTrace(grid, np.ones(size))
    unit_integral = float(np.max(integrate(ones, problem.psi, problem.alpha).values))

    q_norm = 0.0 if direction is None else float(np.linalg.norm(np.asarray(direction, dtype=float)))
    report["unit_integral"] = unit_integral
    report["max_increment"] = float(u[-1])

    return EstimateInputs(
        N_const=M,
        C1=C1,
        C2=C2,
        p=np.full(size, M),
        r=np.full((size, size), L),
        epsilon1=abs(epsilon),
        epsilon2=abs(epsilon) * unit_integral,
        Q=q_norm,
        Q_bar=q_norm * unit_integral,
        mu=mu,
        mu0=mu0,
        N_bar=M,
        q_fun=np.full(size, q_norm),
        report=report,
    )

