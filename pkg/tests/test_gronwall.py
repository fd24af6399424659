import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from frac_volterra.core.analysis import check_bound
from frac_volterra.core.gronwall import (
    GronwallData,
    extremal_solve,
    hypothesis_gap,
    ml_bound,
    nested_ml_bound,
    random_gronwall_data,
    series_bound,
)
from frac_volterra.core.psi_core import Grid, PsiFunction, psi_increments
from frac_volterra.core.special_functions import mittag_leffler
from frac_volterra.errors import DomainError, MittagLefflerOverflow


def _constant_data(n: int = 256, alpha: float = 0.5, psi: PsiFunction = PsiFunction.identity()) -> GronwallData:
    grid = Grid.build(0.0, 1.0, n)
    return GronwallData.from_profiles(grid, psi, alpha, v=1.0, g=1.0, r=1.0, p=0.5, g_tilde=1.0)


def test_hypotheses_hold_for_constant_data() -> None:
    assert all(_constant_data(16).hypotheses().values())


def test_decreasing_data_is_reported() -> None:
    grid = Grid.build(0.0, 1.0, 16)
    data = GronwallData.from_profiles(grid, PsiFunction.identity(), 0.5, v=lambda t: 1.0 - 0.5 * t, g=1.0, r=1.0)
    flags = data.hypotheses()
    assert not flags["v_nondecreasing"]
    assert flags["g_nondecreasing"]
    assert not ml_bound(data).metadata["v_nondecreasing"]


def test_series_matches_mittag_leffler_form_for_constant_data() -> None:
    data = _constant_data()
    series = series_bound(data)
    closed = ml_bound(data)
    np.testing.assert_allclose(series.values, closed.values, rtol=1e-9)
    assert series.provenance == "gronwall-series"
    assert 1 <= series.metadata["terms"] <= 40


def test_mittag_leffler_form_value() -> None:
    data = _constant_data(32, alpha=0.7)
    u = psi_increments(data.psi, data.grid)
    expected = mittag_leffler(0.7, gamma_fn(0.7) * u**0.7)
    np.testing.assert_allclose(ml_bound(data).values, expected, rtol=1e-14)


def test_extremal_solution_is_enclosed_and_close() -> None:
    data = _constant_data()
    extremal = extremal_solve(data)
    closed = ml_bound(data)
    assert check_bound(extremal, closed).holds
    relative = np.abs(extremal.values[:, 0] - closed.values) / closed.values
    assert np.max(relative) <= 5e-2


def test_extremal_solution_satisfies_the_hypothesis_with_equality() -> None:
    data = _constant_data(64)
    for mode in ("single", "nested"):
        u = extremal_solve(data, mode).values[:, 0]
        assert abs(hypothesis_gap(data, u, mode)) <= 1e-12 * np.max(u)
        assert hypothesis_gap(data, 1.1 * u, mode) > 0


def test_nested_bound_encloses_nested_extremal() -> None:
    data = _constant_data(128, psi=PsiFunction.exponential(1.0))
    assert check_bound(extremal_solve(data, "nested"), nested_ml_bound(data)).holds


@pytest.mark.parametrize("mode", ["single", "nested"])
def test_random_instances_are_enclosed(rng: np.random.Generator, mode: str) -> None:
    grid = Grid.build(0.0, 1.0, 64)
    psi = PsiFunction.identity()
    for _ in range(20):
        alpha = float(rng.uniform(0.55, 0.95))
        data = random_gronwall_data(rng, grid, psi, alpha)
        assert all(data.hypotheses().values())
        bound = ml_bound(data) if mode == "single" else nested_ml_bound(data)
        assert check_bound(extremal_solve(data, mode), bound).holds


def test_invalid_inputs() -> None:
    data = _constant_data(8)
    with pytest.raises(DomainError):
        series_bound(data, 0)
    with pytest.raises(DomainError):
        extremal_solve(data, "double")
    with pytest.raises(DomainError):
        GronwallData.from_profiles(data.grid, data.psi, 0.5, v=-1.0)
    with pytest.raises(DomainError):
        GronwallData(data.grid, data.psi, 0.5, v=np.ones(3), g=np.ones(9), r=np.ones((9, 9)))


def test_classical_order_gives_exponential_bounds() -> None:
    grid = Grid.uniform(0.0, 1.0, 64)
    identity = PsiFunction.identity()
    single = GronwallData.from_profiles(grid, identity, 1.0, v=1.0, g=1.0, r=0.7)
    np.testing.assert_allclose(ml_bound(single).values, np.exp(0.7 * grid.nodes), rtol=1e-9)

    nested = GronwallData.from_profiles(grid, identity, 1.0, r=0.0, p=0.7, g_tilde=1.0)
    np.testing.assert_allclose(nested_ml_bound(nested).values, np.exp(0.7 * grid.nodes), rtol=1e-9)


def test_classical_extremal_solution_approaches_the_exponential() -> None:
    errors = []
    for n in (64, 256):
        grid = Grid.uniform(0.0, 1.0, n)
        data = GronwallData.from_profiles(grid, PsiFunction.identity(), 1.0, v=1.0, g=1.0, r=0.7)
        extremal = extremal_solve(data).values[:, 0]
        errors.append(np.max(np.abs(extremal - np.exp(0.7 * grid.nodes))))
    assert errors[1] < errors[0] / 2.0


@pytest.mark.parametrize("zero", ["r", "g"])
def test_vanishing_coupling_leaves_v(zero: str) -> None:
    grid = Grid.build(0.0, 1.0, 32)
    v = lambda t: 1.0 + t  # noqa: E731
    profiles = {"v": v, "g": 0.5, "r": 2.0, "p": 0.5, "g_tilde": 1.0}
    profiles[zero] = 0.0
    data = GronwallData.from_profiles(grid, PsiFunction.identity(), 0.5, **profiles)
    expected = 1.0 + grid.nodes

    np.testing.assert_allclose(series_bound(data).values, expected, rtol=1e-14)
    np.testing.assert_allclose(ml_bound(data).values, expected, rtol=1e-14)
    np.testing.assert_allclose(extremal_solve(data).values[:, 0], expected, rtol=1e-14)


def test_bounds_grow_with_the_kernel(rng: np.random.Generator) -> None:
    grid = Grid.build(0.0, 1.0, 64)
    psi = PsiFunction.identity()
    data = random_gronwall_data(rng, grid, psi, 0.6)
    larger = GronwallData(
        grid, psi, 0.6, v=data.v, g=data.g, r=data.r + 0.3, p=data.p, g_tilde=data.g_tilde
    )
    for bound in (ml_bound, nested_ml_bound, lambda d: series_bound(d, 20)):
        assert np.all(bound(larger).values >= bound(data).values)


@pytest.mark.parametrize("alpha", [0.2, 0.3])
def test_small_orders_enclose_or_overflow(rng: np.random.Generator, alpha: float) -> None:
    grid = Grid.build(0.0, 1.0, 64)
    for _ in range(5):
        data = random_gronwall_data(rng, grid, PsiFunction.identity(), alpha)
        try:
            bound = nested_ml_bound(data)
        except MittagLefflerOverflow:
            continue
        assert check_bound(extremal_solve(data, "nested"), bound).holds
