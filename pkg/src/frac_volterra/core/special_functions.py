#!/usr/bin/env python3
"""
Mittag-Leffler Function Module

Evaluates the one-parameter Mittag-Leffler function

    E_alpha(z) = sum_k z^k / Gamma(alpha*k + 1)

for real arguments:
- Taylor series with compensated summation below the branch switch
- Exponential asymptotic form with algebraic corrections above it
- Explicit overflow signal instead of silent infinities
- Accuracy-degraded flag for strongly negative arguments
"""

import math
import sys
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.special import gammaln, rgamma

from ..errors import DomainError, MittagLefflerOverflow
from ..log import get_logger

logger = get_logger(__name__)

TERM_CAP = 10_000
NEGATIVE_LIMIT = -10.0
# Branch switch where z**(1/alpha) reaches this value; beyond it the
# algebraic corrections are below 1e-17 of the exponential part.
SWITCH_EXPONENT = 40.0
ASYMPTOTIC_TERMS = 8
MAX_ALPHA = 2.0

_EPS = sys.float_info.epsilon
_LOG_MAX = math.log(sys.float_info.max)


@dataclass(frozen=True)
class MlParams:
    """Arguments of a Mittag-Leffler evaluation.

    Attributes:
        alpha: Order, 0 < alpha <= 2
        z: Real argument
    """

    alpha: float
    z: float

    def __post_init__(self):
        if not math.isfinite(self.alpha) or self.alpha <= 0:
            raise DomainError(f"Mittag-Leffler order must be positive, got {self.alpha}")
        if self.alpha > MAX_ALPHA:
            raise DomainError(f"Mittag-Leffler order above {MAX_ALPHA} is not supported")
        if not math.isfinite(self.z):
            raise DomainError(f"Mittag-Leffler argument must be finite, got {self.z}")


@dataclass(frozen=True)
class MlValue:
    """Result of ml_evaluate() with evaluation diagnostics."""

    value: float
    branch: str
    terms: int
    degraded: bool = False


def switch_point(alpha: float) -> float:
    """Argument above which the asymptotic branch is used."""
    return SWITCH_EXPONENT**alpha


def _series(alpha: float, z: float) -> Tuple[float, int, float]:
    """Sum the Taylor series; returns (value, terms used, largest |term|)."""
    if z == 0.0:
        return 1.0, 1, 1.0

    log_abs_z = math.log(abs(z))
    terms = [1.0]
    running = 1.0
    largest = 1.0
    previous = 1.0

    for k in range(1, TERM_CAP):
        log_term = k * log_abs_z - float(gammaln(alpha * k + 1.0))
        if log_term > _LOG_MAX:
            raise MittagLefflerOverflow(alpha, z)
        term = math.exp(log_term)
        largest = max(largest, term)
        if z < 0 and k % 2 == 1:
            term = -term
        terms.append(term)
        running += term

        # stagnation: term below one ulp of the partial sum and decaying
        if abs(term) <= _EPS * abs(running) and abs(term) <= previous:
            break
        previous = abs(term)
    else:
        logger.warning("E_%g(%g): series hit the %d-term cap", alpha, z, TERM_CAP)

    value = math.fsum(terms)
    if not math.isfinite(value):
        raise MittagLefflerOverflow(alpha, z)
    return value, len(terms), largest


def _asymptotic(alpha: float, z: float) -> Tuple[float, int]:
    """Exponential form (1/alpha) exp(z^(1/alpha)) - sum_k z^-k / Gamma(1 - alpha*k)."""
    exponent = z ** (1.0 / alpha)
    if exponent - math.log(alpha) >= _LOG_MAX:
        raise MittagLefflerOverflow(alpha, z)

    corrections = [
        -(z ** (-k)) * float(rgamma(1.0 - alpha * k))
        for k in range(1, ASYMPTOTIC_TERMS + 1)
    ]
    value = math.fsum([math.exp(exponent) / alpha] + corrections)
    if not math.isfinite(value):
        raise MittagLefflerOverflow(alpha, z)
    return value, ASYMPTOTIC_TERMS + 1


def ml_evaluate(params: MlParams) -> MlValue:
    """
    Evaluate E_alpha(z) and report how it was obtained.

    Args:
        params: Order and argument

    Returns:
        MlValue with the value, the branch used, the term count and
        whether the result is accuracy-degraded

    Raises:
        MittagLefflerOverflow: if the value exceeds double precision
    """
    alpha, z = params.alpha, params.z

    if z >= 0.0:
        if z > switch_point(alpha):
            value, terms = _asymptotic(alpha, z)
            return MlValue(value, "asymptotic", terms)
        value, terms, _ = _series(alpha, z)
        return MlValue(value, "series", terms)

    # Negative arguments: alternating series, accuracy limited by cancellation
    try:
        value, terms, largest = _series(alpha, z)
    except MittagLefflerOverflow:
        logger.warning("E_%g(%g): alternating series overflows, value unavailable", alpha, z)
        return MlValue(math.nan, "series", TERM_CAP, degraded=True)

    cancellation = largest * _EPS / max(abs(value), sys.float_info.min)
    degraded = z < NEGATIVE_LIMIT or cancellation > 1e-8
    if degraded:
        logger.warning(
            "E_%g(%g) is accuracy-degraded (cancellation ratio %.1e)",
            alpha, z, cancellation,
        )
    return MlValue(value, "series", terms, degraded=degraded)


def ml_eval(params: MlParams) -> float:
    """Return E_alpha(z)."""
    return ml_evaluate(params).value


def mittag_leffler(alpha: float, z: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    Elementwise E_alpha(z) for scalars or arrays.

    Args:
        alpha: Order, 0 < alpha <= 2
        z: Scalar or array of real arguments

    Returns:
        Float for scalar input, array of the same shape otherwise
    """
    z_arr = np.asarray(z, dtype=float)
    if z_arr.ndim == 0:
        return ml_eval(MlParams(alpha, float(z_arr)))

    out = np.empty_like(z_arr)
    for index, value in np.ndenumerate(z_arr):
        out[index] = ml_eval(MlParams(alpha, float(value)))
    return out
