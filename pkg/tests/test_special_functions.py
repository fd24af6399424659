import math

import mpmath
import numpy as np
import pytest

from frac_volterra.core.special_functions import (
    MlParams,
    ml_eval,
    ml_evaluate,
    mittag_leffler,
    switch_point,
)
from frac_volterra.errors import DomainError, MittagLefflerOverflow


def _half_order_reference(z: float) -> float:
    # E_{1/2}(z) = exp(z^2) erfc(-z)
    with mpmath.workdps(50):
        return float(mpmath.exp(mpmath.mpf(z) ** 2) * mpmath.erfc(-mpmath.mpf(z)))


def test_order_one_is_exponential() -> None:
    for z in np.linspace(0.0, 30.0, 200):
        assert ml_eval(MlParams(1.0, float(z))) == pytest.approx(math.exp(z), rel=1e-10)


def test_order_two_is_hyperbolic_cosine() -> None:
    for z in np.linspace(0.0, 30.0, 200):
        expected = math.cosh(math.sqrt(z))
        assert ml_eval(MlParams(2.0, float(z))) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("z", [-1.0, 0.5, 3.0, 6.0, 10.0, 20.0])
def test_half_order_matches_extended_precision(z: float) -> None:
    assert ml_eval(MlParams(0.5, z)) == pytest.approx(_half_order_reference(z), rel=1e-10)


def test_zero_argument_is_one() -> None:
    for alpha in (0.1, 0.5, 1.0, 1.7, 2.0):
        assert ml_eval(MlParams(alpha, 0.0)) == 1.0


def test_branch_switches_above_switch_point() -> None:
    assert switch_point(1.0) == pytest.approx(40.0)
    assert ml_evaluate(MlParams(1.0, 10.0)).branch == "series"
    result = ml_evaluate(MlParams(1.0, 100.0))
    assert result.branch == "asymptotic"
    assert result.value == pytest.approx(math.exp(100.0), rel=1e-12)


def test_nondecreasing_on_positive_axis() -> None:
    values = mittag_leffler(0.6, np.linspace(0.0, 50.0, 400))
    assert np.all(np.diff(values) > 0)


def test_negative_arguments_flag_degraded_accuracy() -> None:
    assert not ml_evaluate(MlParams(1.0, -1.0)).degraded
    assert ml_evaluate(MlParams(1.0, -15.0)).degraded


def test_overflow_is_signalled() -> None:
    with pytest.raises(MittagLefflerOverflow):
        ml_eval(MlParams(1.0, 800.0))
    with pytest.raises(OverflowError):
        ml_eval(MlParams(0.5, 50.0))


@pytest.mark.parametrize("alpha", [0.0, -0.5, 2.5, math.nan])
def test_invalid_order_is_rejected(alpha: float) -> None:
    with pytest.raises(DomainError):
        MlParams(alpha, 1.0)


def test_array_evaluation_keeps_shape() -> None:
    z = np.array([[0.0, 1.0], [2.0, 3.0]])
    values = mittag_leffler(1.0, z)
    assert values.shape == (2, 2)
    np.testing.assert_allclose(values, np.exp(z), rtol=1e-12)
    assert isinstance(mittag_leffler(1.0, 1.0), float)


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0, 1.6])
def test_agrees_with_the_truncated_series_near_the_origin(alpha: float) -> None:
    for z in np.linspace(0.0, 1.0, 11):
        partial = math.fsum(float(z) ** k / math.gamma(alpha * k + 1.0) for k in range(50))
        assert ml_eval(MlParams(alpha, float(z))) == pytest.approx(partial, rel=1e-12, abs=1e-12)
