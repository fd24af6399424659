#!/usr/bin/env python3
"""
psi-Fractional Calculus Module

This module discretizes the psi-fractional operators on a grid:
- psi-Riemann-Liouville integral I^{alpha,psi} by product integration
- psi-Hilfer derivative of order alpha and type beta
- Closed-form and composition identity checks

Substituting u = psi(s) turns I^{alpha,psi} into a classical
Riemann-Liouville integral in u. The piecewise-linear interpolant of the
samples in u is integrated exactly against (U_i - u)^(mu - 1).
Samples that behave like u^e near a are written u^e y, and y is
interpolated instead.
"""

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Hashable, Optional, Tuple

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import gamma as gamma_fn
from scipy.special import betainc, rgamma, roots_jacobi, roots_legendre

from ..errors import DomainError
from ..log import get_logger
from ..models import SolutionTrace
from .psi_core import Grid, PsiFunction, psi_increments
from .special_functions import mittag_leffler

logger = get_logger(__name__)

# The near-cancelling panel moment switches to its Taylor series when
# (mu + 1) |log(d1/d0)| falls below this value.
MOMENT_SERIES_SWITCH = 0.5
MOMENT_SERIES_TERMS = 24
EXPONENT_TOL = 1e-12
# Gauss rule size for panels integrated against a u^e profile
PROFILE_NODES = 32
# Weight matrices kept by product_weights()
WEIGHT_CACHE_BYTES = 128 * 2**20


@dataclass(frozen=True)
class OperatorParams:
    """Order, type and base point of the psi-Hilfer operators.

    Attributes:
        alpha: Order, 0 < alpha <= 1
        beta: Type, 0 <= beta <= 1 (0 Riemann-Liouville end, 1 Caputo end)
        psi: The psi function
        a: Base point
    """

    alpha: float
    beta: float
    psi: PsiFunction
    a: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 <= self.beta <= 1:
            raise DomainError(f"beta must lie in [0, 1], got {self.beta}")

    @property
    def gamma(self) -> float:
        return self.alpha + self.beta * (1.0 - self.alpha)

    @property
    def inner_order(self) -> float:
        """(1 - beta)(1 - alpha)."""
        return (1.0 - self.beta) * (1.0 - self.alpha)

    @property
    def outer_order(self) -> float:
        """beta (1 - alpha)."""
        return self.beta * (1.0 - self.alpha)


def verification_grading(alpha: float) -> float:
    """Grading exponent that resolves (psi(t) - psi(a))^alpha start-up behaviour."""
    return float(np.clip(1.2 / alpha, 2.0, 4.0))


def _moment_gap(mu: float, log_ratio: np.ndarray) -> np.ndarray:
    """expm1((mu+1)L)/(mu+1) - expm1(mu L)/mu, accurate for small L."""
    out = np.empty_like(log_ratio)
    small = np.abs(log_ratio) * (mu + 1.0) < MOMENT_SERIES_SWITCH

    big = log_ratio[~small]
    out[~small] = np.expm1((mu + 1.0) * big) / (mu + 1.0) - np.expm1(mu * big) / mu

    lr = log_ratio[small]
    power = lr.copy()
    factorial = 1.0
    total = np.zeros_like(lr)
    for n in range(2, MOMENT_SERIES_TERMS + 2):
        power = power * lr
        factorial *= n
        total += power * ((mu + 1.0) ** (n - 1) - mu ** (n - 1)) / factorial
    out[small] = total
    return out


def _panel_terms(mu: float, d0: np.ndarray, widths: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Moments of (T - u)^(mu - 1) over panels [T - d0, T - d0 + width].

    Returns:
        (zeroth, first) where zeroth = int (T-u)^(mu-1) du and
        first = int (T-u)^(mu-1) (u - panel start) du
    """
    with np.errstate(divide="ignore"):
        log_ratio = np.log1p(-widths / d0)
    scale = d0**mu
    zeroth = -scale * np.expm1(mu * log_ratio) / mu
    first = scale * d0 * _moment_gap(mu, log_ratio)
    return zeroth, first


def _profile_weights(u: np.ndarray, order: float, e: float) -> np.ndarray:
    """
    Weights for samples x = u^e y with y piecewise linear on the panels.

    y is held at y(u_1) on the first panel, whose u^e (U - s)^(order - 1)
    moment has a closed form. Later panels are integrated by Gauss-Legendre
    rules, the panel ending at U by a Gauss-Jacobi rule. Column 0 stays zero.
    """
    n = u.size - 1
    w = np.zeros((n + 1, n + 1))
    upper = u[1:]
    ratio = np.minimum(u[1] / upper, 1.0)
    w[1:, 1] = (
        u[1] ** (-e) * upper ** (order + e) * beta_fn(e + 1.0, order)
        * betainc(e + 1.0, order, ratio)
    )
    if n < 2:
        return w

    unscale = np.zeros(n + 1)
    unscale[1:] = upper ** (-e)
    widths = np.diff(u)
    panels = np.arange(1, n)
    h = widths[panels][:, None]

    # Panel ending at the evaluation node
    jac_x, jac_w = roots_jacobi(PROFILE_NODES, order - 1.0, 0.0)
    s = u[panels][:, None] + 0.5 * h * (1.0 + jac_x)
    last = (0.5 * h) ** order * jac_w * s**e
    rows = panels + 1
    w[rows, panels] += (last @ (0.5 * (1.0 - jac_x))) * unscale[panels]
    w[rows, rows] += (last @ (0.5 * (1.0 + jac_x))) * unscale[rows]

    # Panels strictly inside [u_1, U - h]
    leg_x, leg_w = roots_legendre(PROFILE_NODES)
    s = u[panels][:, None] + 0.5 * h * (1.0 + leg_x)
    profile = 0.5 * h * leg_w * s**e
    left = profile * (0.5 * (1.0 - leg_x))
    right = profile * (0.5 * (1.0 + leg_x))
    tail = 0.5 * h * (1.0 - leg_x)
    for i in range(3, n + 1):
        inner = slice(0, i - 2)
        j = panels[inner]
        gap = (u[i] - u[j + 1])[:, None] + tail[inner]
        kernel = gap ** (order - 1.0)
        w[i, j] += np.sum(left[inner] * kernel, axis=1) * unscale[j]
        w[i, j + 1] += np.sum(right[inner] * kernel, axis=1) * unscale[j + 1]
    return w


def weight_matrix(
    u: np.ndarray, order: float, endpoint_exponent: Optional[float] = None
) -> np.ndarray:
    """
    Product-trapezoid weights of I^{order} in psi-space.

    Row i holds the weights W[i, j] with
    (I^order x)(t_i) ~ sum_j W[i, j] x(t_j). The factor 1/Gamma(order) is
    included.

    Args:
        u: Increments psi(t_i) - psi(a), strictly increasing from 0
        order: Integration order, > 0
        endpoint_exponent: If given (> -1), samples behave like u^e near a;
            x / u^e is interpolated instead of x and column 0 is never used

    Returns:
        Lower-triangular (N + 1, N + 1) matrix
    """
    if not order > 0:
        raise DomainError(f"integration order must be positive, got {order}")
    if endpoint_exponent is not None:
        if not endpoint_exponent > -1.0:
            raise DomainError(f"endpoint exponent must exceed -1, got {endpoint_exponent}")
        return _profile_weights(u, order, endpoint_exponent) / gamma_fn(order)

    n = u.size - 1
    widths = np.diff(u)
    w = np.zeros((n + 1, n + 1))
    for i in range(1, n + 1):
        zeroth, first = _panel_terms(order, u[i] - u[:i], widths[:i])
        right = first / widths[:i]
        w[i, :i] += zeroth - right
        w[i, 1 : i + 1] += right
    return w / gamma_fn(order)


class WeightCache:
    """
    Least-recently-used store of read-only weight matrices.

    Entries are evicted oldest first once their total size exceeds
    max_bytes; the newest entry is always kept.
    """

    def __init__(self, max_bytes: int = WEIGHT_CACHE_BYTES):
        self.max_bytes = max_bytes
        self._entries: "OrderedDict[Hashable, np.ndarray]" = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key: Hashable, build: Callable[[], np.ndarray]) -> np.ndarray:
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                return self._entries[key]
        value = build()
        value.flags.writeable = False
        with self._lock:
            self._entries[key] = value
            self._entries.move_to_end(key)
            while len(self._entries) > 1 and self.nbytes > self.max_bytes:
                self._entries.popitem(last=False)
        return value

    @property
    def nbytes(self) -> int:
        return sum(entry.nbytes for entry in self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: Hashable) -> bool:
        return key in self._entries

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


weight_cache = WeightCache()


def product_weights(
    grid: Grid, psi: PsiFunction, order: float, endpoint_exponent: Optional[float] = None
) -> np.ndarray:
    """Cached, read-only weight_matrix() for a (grid, psi, order, exponent) key."""

    def build() -> np.ndarray:
        w = weight_matrix(psi_increments(psi, grid), order, endpoint_exponent)
        logger.debug(
            "Built %dx%d weights (order %g, psi %s)", w.shape[0], w.shape[1], order, psi.label
        )
        return w

    return weight_cache.get((grid, psi, order, endpoint_exponent), build)


def panel_moments(u: np.ndarray, order: float) -> np.ndarray:
    """
    A[i, j] = int over [u_j, u_{j+1}] of (u_i - s)^(order - 1) ds for j < i.

    These are the left-rectangle product-integration weights without the
    1/Gamma factor.
    """
    n = u.size - 1
    widths = np.diff(u)
    moments = np.zeros((n + 1, n + 1))
    for i in range(1, n + 1):
        zeroth, _ = _panel_terms(order, u[i] - u[:i], widths[:i])
        moments[i, :i] = zeroth
    return moments


def extrapolate_to_start(u: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Linear extrapolation in u of nodes 1 and 2 back to u = 0."""
    slope = (values[2] - values[1]) / (u[2] - u[1])
    return values[1] - u[1] * slope


def _check_start(a: float, x: SolutionTrace) -> None:
    if x.grid.a != a:
        raise DomainError(f"samples start at {x.grid.a}, operator base point is {a}")


def _profile_exponent(x: SolutionTrace) -> Optional[float]:
    """Exponent e whose u^e profile the weights factor out, None for plain samples."""
    if x.singular_endpoint:
        if x.endpoint_exponent is None:
            raise DomainError("singular trace needs an endpoint exponent to be integrated")
        return x.endpoint_exponent
    e = x.endpoint_exponent
    if e is not None and EXPONENT_TOL < e < 1.0 and not np.any(x.values[0]):
        return e
    return None


def integrate(x: SolutionTrace, psi: PsiFunction, order: float) -> SolutionTrace:
    """
    I^{order,psi} of a trace at every node.

    Traces tagged with an endpoint exponent e in (-1, 1) (node 0 zero or a
    placeholder) are integrated as u^e times a piecewise-linear factor. The
    result behaves like u^(e + order); it is flagged singular while that
    exponent is negative and keeps the tag while it lies in (0, 1). Plain
    samples with x(a) != 0 and 0 < order < 1 come back tagged with order.
    """
    if order == 0:
        return x.with_values(x.values.copy())

    exponent = _profile_exponent(x)
    weights = product_weights(x.grid, psi, order, exponent)
    values = weights @ x.values
    if exponent is None:
        if order < 1.0 and np.any(x.values[0]):
            return SolutionTrace(x.grid, values, False, order)
        return SolutionTrace(x.grid, values)

    out_exponent = exponent + order
    if out_exponent < -EXPONENT_TOL:
        values[0] = 0.0
        return SolutionTrace(x.grid, values, True, out_exponent)
    if abs(out_exponent) <= EXPONENT_TOL:
        values[0] = extrapolate_to_start(psi_increments(psi, x.grid), values)
        return SolutionTrace(x.grid, values, False, 0.0)
    values[0] = 0.0
    return SolutionTrace(x.grid, values, False, out_exponent if out_exponent < 1.0 else None)


def frac_integral(params: OperatorParams, x: SolutionTrace) -> SolutionTrace:
    """
    psi-Riemann-Liouville integral I^{alpha,psi}_{a+} of grid samples.

    Args:
        params: Operator parameters (only alpha, psi and a are used)
        x: Samples on a grid starting at a

    Returns:
        Trace of the integral; the value at t_0 = a is 0

    Raises:
        DomainError: if the grid does not start at a
    """
    _check_start(params.a, x)
    return integrate(x, params.psi, params.alpha)


def _u_derivative(u: np.ndarray, values: np.ndarray) -> np.ndarray:
    """(1/psi') d/dt, i.e. d/du, by second-order differences on nonuniform nodes."""
    return np.gradient(values, u, axis=0, edge_order=2)


def hilfer_derivative(params: OperatorParams, x: SolutionTrace) -> SolutionTrace:
    """
    psi-Hilfer derivative of order alpha and type beta.

    Regular samples use the equivalent form
        x(a) (psi - psi(a))^(-alpha) / Gamma(1 - alpha) [when beta < 1]
        + d/du I^{1-alpha,psi}(x - x(a)),
    which is the three-stage composition
    I^{beta(1-alpha)} (d/du) I^{(1-beta)(1-alpha)} with the value at a
    split off. A u^e tag on samples vanishing at a carries over to
    x - x(a). Weakly singular samples run the composition stage by stage.

    Raises:
        DomainError: for fewer than 3 nodes or samples too singular at a
    """
    grid = x.grid
    if grid.n < 2:
        raise DomainError("Hilfer derivative needs at least 3 grid nodes")
    _check_start(params.a, x)
    u = psi_increments(params.psi, grid)

    if x.singular_endpoint:
        return _staged_derivative(params, x, u)

    start = x.values[0].copy()
    remainder = SolutionTrace(grid, x.values - start)
    if not np.any(start) and x.endpoint_exponent is not None and x.endpoint_exponent > EXPONENT_TOL:
        remainder = x
    smoothed = integrate(remainder, params.psi, 1.0 - params.alpha)
    values = _u_derivative(u, smoothed.values)

    if params.beta < 1.0 and params.alpha < 1.0 and np.any(start != 0.0):
        values[1:] += start * (u[1:, None] ** (-params.alpha) * float(rgamma(1.0 - params.alpha)))
        values[0] = 0.0
        return SolutionTrace(grid, values, True, -params.alpha)
    return SolutionTrace(grid, values)


def _staged_derivative(params: OperatorParams, x: SolutionTrace, u: np.ndarray) -> SolutionTrace:
    inner = integrate(x, params.psi, params.inner_order)
    if inner.singular_endpoint:
        raise DomainError(
            "samples are too singular at a: the inner integral of the Hilfer derivative diverges"
        )

    exponent = inner.endpoint_exponent
    if exponent is not None and EXPONENT_TOL < exponent < 1.0:
        slope = np.zeros_like(inner.values)
        slope[1:] = _u_derivative(u[1:], inner.values[1:])
        slope_trace = SolutionTrace(x.grid, slope, True, exponent - 1.0)
    else:
        slope_trace = SolutionTrace(x.grid, _u_derivative(u, inner.values))
    return integrate(slope_trace, params.psi, params.outer_order)


def initial_weighted_value(psi: PsiFunction, order: float, x: SolutionTrace) -> np.ndarray:
    """
    (I^{order,psi} x)(a+), extrapolated from the first interior nodes.

    With order = 1 - gamma this is the weighted initial value of an
    initial-value-problem solution.
    """
    if x.grid.n < 2:
        raise DomainError("extrapolation needs at least 3 grid nodes")
    integral = integrate(x, psi, order)
    u = psi_increments(psi, x.grid)
    return extrapolate_to_start(u, integral.values)


def verify_lemma1(alpha: float, xi: float, psi: PsiFunction, grid: Grid) -> float:
    """
    Check I^{alpha,psi} E_alpha[xi u^alpha] = (E_alpha[xi u^alpha] - 1) / xi.

    Returns:
        Maximum relative error over nodes with t_i > a
    """
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if not xi > 0:
        raise DomainError(f"xi must be positive, got {xi}")

    u = psi_increments(psi, grid)
    weight = np.asarray(mittag_leffler(alpha, xi * u**alpha), dtype=float)
    params = OperatorParams(alpha, 1.0, psi, grid.a)
    integral = frac_integral(params, SolutionTrace(grid, weight)).values[:, 0]

    exact = (weight - 1.0) / xi
    error = np.abs(integral[1:] - exact[1:]) / np.abs(exact[1:])
    worst = float(np.max(error))
    logger.info("Closed-form integral check: alpha=%g xi=%g psi=%s err=%.3e",
                alpha, xi, psi.label, worst)
    return worst


def _interior_sup(difference: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(difference[1:-1], axis=1)))


def verify_composition(params: OperatorParams, x: SolutionTrace) -> Tuple[float, float]:
    """
    Residuals of the two composition identities over interior nodes.

    Returns:
        (derivative_of_integral, integral_of_derivative) where the first is
        sup |D(I^alpha x) - x| and the second is
        sup |I^alpha(D x) - [x - Psi^gamma (I^{(1-beta)(1-alpha)} x)(a+)]|
    """
    _check_start(params.a, x)
    grid = x.grid
    u = psi_increments(params.psi, grid)

    forward = hilfer_derivative(params, frac_integral(params, x))
    residual_first = _interior_sup(forward.values - x.values)

    backward = frac_integral(params, hilfer_derivative(params, x))

    # (I^{(1-beta)(1-alpha)} x)(a+)
    if x.singular_endpoint:
        start = initial_weighted_value(params.psi, params.inner_order, x)
    elif params.inner_order == 0.0:
        start = x.values[0]
    else:
        start = np.zeros(x.dimension)

    gamma = params.gamma
    weight = np.ones(grid.n + 1)
    if gamma < 1.0:
        weight[1:] = u[1:] ** (gamma - 1.0) / math.gamma(gamma)
        weight[0] = 0.0
    expected = x.values - weight[:, None] * start[None, :]
    residual_second = _interior_sup(backward.values - expected)

    logger.info(
        "Composition check: alpha=%g beta=%g residuals %.3e / %.3e",
        params.alpha, params.beta, residual_first, residual_second,
    )
    return residual_first, residual_second
