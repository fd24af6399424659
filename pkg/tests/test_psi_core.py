import math

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from frac_volterra.core.psi_core import (
    Grid,
    PsiFunction,
    WeightedSpaceParams,
    endpoint_weight_on_grid,
    kernel_N,
    psi_gamma_weight,
    psi_increments,
    space_weights,
    weighted_metric,
    weighted_norm,
)
from frac_volterra.core.special_functions import mittag_leffler
from frac_volterra.errors import DomainError
from frac_volterra.models import SolutionTrace


def test_families_evaluate_and_differentiate() -> None:
    t = np.array([1.0, 2.0])
    np.testing.assert_allclose(PsiFunction.power(2.0).eval(t), [1.0, 4.0])
    np.testing.assert_allclose(PsiFunction.power(2.0).deriv(t), [2.0, 4.0])
    np.testing.assert_allclose(PsiFunction.logarithm().deriv(t), [1.0, 0.5])
    np.testing.assert_allclose(PsiFunction.exponential(0.5).deriv(t), 0.5 * np.exp(0.5 * t))
    assert PsiFunction.power(2.0).label == "power(rho=2)"
    assert PsiFunction.identity().label == "identity"


def test_increment_avoids_cancellation() -> None:
    a, h = 1.0e8, 1.0e-3
    expected = math.log1p(h / a)
    assert PsiFunction.logarithm().increment(a, h) == pytest.approx(expected, rel=1e-14)
    assert PsiFunction.power(0.5).increment(4.0, 0.0) == 0.0


def test_increment_accepts_array_base_points() -> None:
    psi = PsiFunction.exponential(1.0)
    a = np.array([0.0, 1.0])
    np.testing.assert_allclose(psi.increment(a, 0.5), np.exp(a + 0.5) - np.exp(a), rtol=1e-14)


def test_admissibility_checks() -> None:
    PsiFunction.logarithm().check_admissible(1.0, 2.0)
    with pytest.raises(DomainError):
        PsiFunction.logarithm().check_admissible(0.0, 1.0)
    with pytest.raises(DomainError):
        PsiFunction.identity().check_admissible(1.0, 1.0)

    wrong = PsiFunction.custom(lambda t: t**2, lambda t: np.ones_like(t), name="wrong")
    with pytest.raises(DomainError):
        wrong.check_admissible(1.0, 2.0)
    with pytest.raises(DomainError):
        PsiFunction("custom")
    with pytest.raises(DomainError):
        PsiFunction("cubic")


def test_graded_grid_layout() -> None:
    grid = Grid.build(0.0, 2.0, 8, 2.0)
    assert grid.n == 8
    assert grid.nodes[0] == 0.0 and grid.nodes[-1] == 2.0
    assert grid.nodes[1] == pytest.approx(2.0 / 64)
    assert np.all(np.diff(grid.nodes) > 0)
    assert grid.grading == "graded"
    assert Grid.uniform(0.0, 1.0, 4).grading == "uniform"
    assert grid.same_as(Grid.build(0.0, 2.0, 8, 2.0))
    assert not grid.same_as(Grid.uniform(0.0, 2.0, 8))


@pytest.mark.parametrize("n, q", [(0, 2.0), (4, 0.5)])
def test_grid_rejects_bad_parameters(n: int, q: float) -> None:
    with pytest.raises(DomainError):
        Grid.build(0.0, 1.0, n, q)


def test_grid_rejects_non_increasing_offsets() -> None:
    with pytest.raises(DomainError):
        Grid(0.0, 1.0, np.array([0.0, 0.5, 0.5, 1.0]))


def test_increments_are_cached_and_read_only() -> None:
    grid = Grid.build(1.0, 2.0, 16)
    psi = PsiFunction.logarithm()
    u = psi_increments(psi, grid)
    assert u is psi_increments(psi, grid)
    assert u[0] == 0.0
    np.testing.assert_allclose(u, np.log(grid.nodes), rtol=1e-13, atol=1e-16)
    with pytest.raises(ValueError):
        u[1] = 0.0


def test_kernel_values() -> None:
    assert kernel_N(PsiFunction.identity(), 0.5, 1.0, 0.75) == pytest.approx(2.0)
    s = np.array([0.2, 0.5])
    expected = 2.0 * s * (1.0 - s**2) ** (0.5 - 1.0)
    np.testing.assert_allclose(kernel_N(PsiFunction.power(2.0), 0.5, 1.0, s), expected, rtol=1e-13)
    with pytest.raises(DomainError):
        kernel_N(PsiFunction.identity(), 0.5, 1.0, 1.0)


def test_endpoint_weight() -> None:
    psi = PsiFunction.identity()
    assert psi_gamma_weight(psi, 1.0, 0.3, 0.0) == 1.0
    assert psi_gamma_weight(psi, 0.5, 0.25, 0.0) == pytest.approx(2.0 / math.sqrt(math.pi))
    with pytest.raises(DomainError):
        psi_gamma_weight(psi, 0.5, 0.0, 0.0)

    grid = Grid.build(0.0, 1.0, 8)
    weights = endpoint_weight_on_grid(psi, 0.5, grid)
    assert weights[0] == 0.0
    np.testing.assert_allclose(weights[1:], grid.nodes[1:] ** -0.5 / gamma_fn(0.5))


def test_weighted_norm_of_the_weight_is_one() -> None:
    grid = Grid.build(0.0, 1.0, 64)
    space = WeightedSpaceParams(2.0, 0.5, PsiFunction.identity(), 0.0)
    weight = mittag_leffler(0.5, 2.0 * grid.nodes**0.5)
    assert weighted_norm(SolutionTrace(grid, weight), space) == pytest.approx(1.0, rel=1e-14)
    assert weighted_norm(SolutionTrace(grid, np.zeros(65)), space) == 0.0


def test_weighted_metric_axioms(rng: np.random.Generator) -> None:
    grid = Grid.build(0.0, 1.0, 32)
    space = WeightedSpaceParams(1.5, 0.7, PsiFunction.exponential(1.0), 0.0)
    x, y, z = (SolutionTrace(grid, rng.normal(size=(33, 2))) for _ in range(3))

    assert weighted_metric(x, x, space) == 0.0
    assert weighted_metric(x, y, space) == pytest.approx(weighted_metric(y, x, space))
    assert weighted_metric(x, z, space) <= weighted_metric(x, y, space) + weighted_metric(y, z, space) + 1e-15


def test_singular_node_is_skipped() -> None:
    grid = Grid.build(0.0, 1.0, 16)
    values = np.ones((17, 1))
    values[0] = 1.0e6
    trace = SolutionTrace(grid, values, endpoint_exponent=-0.5)
    space = WeightedSpaceParams(1.0, 0.5, PsiFunction.identity(), 0.0)
    assert trace.singular_endpoint
    assert weighted_norm(trace, space) <= 1.0


def test_space_must_start_at_grid_start() -> None:
    grid = Grid.build(0.0, 1.0, 8)
    with pytest.raises(DomainError):
        space_weights(WeightedSpaceParams(1.0, 0.5, PsiFunction.identity(), 0.5), grid)
    with pytest.raises(DomainError):
        WeightedSpaceParams(0.0, 0.5, PsiFunction.identity(), 0.0)


def test_weighted_norm_is_absolutely_homogeneous(rng: np.random.Generator) -> None:
    grid = Grid.build(0.0, 1.0, 32)
    space = WeightedSpaceParams(1.5, 0.6, PsiFunction.identity(), 0.0)
    x = SolutionTrace(grid, rng.normal(size=(33, 3)))
    for c in (-2.5, 0.0, 0.1, 7.0):
        scaled = SolutionTrace(grid, c * x.values)
        assert weighted_norm(scaled, space) == pytest.approx(abs(c) * weighted_norm(x, space), rel=1e-12, abs=0.0)


def test_classical_order_gives_the_exponential_weight(rng: np.random.Generator) -> None:
    grid = Grid.build(0.0, 1.0, 256)
    xi = 1.7
    space = WeightedSpaceParams(xi, 1.0, PsiFunction.identity(), 0.0)
    ratio = space_weights(space, grid) / np.exp(xi * grid.nodes)
    assert np.max(np.abs(ratio - 1.0)) <= 1e-10

    x, y = (SolutionTrace(grid, rng.normal(size=(257, 2))) for _ in range(2))
    expected = np.max(np.linalg.norm(x.values - y.values, axis=1) / np.exp(xi * grid.nodes))
    assert weighted_metric(x, y, space) == pytest.approx(expected, rel=1e-10)
