import math

import numpy as np
import pytest

from frac_volterra.core.analysis import (
    EstimateInputs,
    apriori_bound_integral,
    apriori_bound_ivp,
    check_bound,
    dependence_bound_integral,
    dependence_bound_ivp,
    estimate_inputs,
    parameter_dependence_integral,
    parameter_dependence_ivp,
)
from frac_volterra.core.psi_core import Grid, PsiFunction
from frac_volterra.core.solver import solve
from frac_volterra.errors import DomainError
from frac_volterra.models import BoundCurve, SolutionTrace
from frac_volterra.scenario.registry import (
    ForcingSpec,
    KernelSpec,
    RhsSpec,
    build_problem,
    parameter_pair,
    perturbed,
)

GRID = Grid.build(0.0, 1.0, 128)
TIGHT = 1e-13


def _problem(kind: str = "integral", family: str = "affine", psi: PsiFunction = PsiFunction.identity(), **kwargs):
    f_spec = RhsSpec(family, 0.3, 0.2, ForcingSpec("const", 1.0))
    return build_problem(f_spec, KernelSpec("linear", 0.5), 0.6, psi, 0.0, 1.0, kind=kind, **kwargs)


def test_apriori_integral_encloses_solution() -> None:
    problem = _problem()
    trace = solve(problem, GRID)
    inputs = estimate_inputs(problem, GRID)
    assert inputs.N_const == 0.3 and inputs.C1 == pytest.approx(1.0)

    curve = apriori_bound_integral(inputs, problem.psi, problem.alpha, GRID)
    assert curve.provenance == "apriori-integral"
    result = check_bound(trace, curve)
    assert result.holds
    assert result.worst_margin <= 1.0


@pytest.mark.parametrize("family", ["affine", "bounded"])
def test_apriori_ivp_encloses_solution(family: str) -> None:
    problem = _problem("ivp", family, psi=PsiFunction.exponential(0.5), beta=1.0, x0=[0.5])
    trace = solve(problem, GRID)
    inputs = estimate_inputs(problem, GRID)
    assert inputs.report["C2_finite"]

    curve = apriori_bound_ivp(inputs, problem.psi, problem.alpha, GRID)
    assert check_bound(trace, curve).holds


@pytest.mark.parametrize("epsilon", [1e-1, 1e-2, 1e-3])
def test_continuous_dependence_on_perturbations(epsilon: float) -> None:
    problem = _problem()
    difference = solve(problem, GRID, tol=TIGHT).difference(solve(perturbed(problem, epsilon), GRID, tol=TIGHT))
    inputs = estimate_inputs(problem, GRID, epsilon=epsilon)
    curve = dependence_bound_integral(inputs, problem.psi, problem.alpha, GRID)
    assert curve.metadata["lower_point"] == "a"
    assert check_bound(difference, curve).holds


def test_continuous_dependence_of_initial_value_problem() -> None:
    problem = _problem("ivp", beta=0.7, x0=[0.0])
    difference = solve(problem, GRID).difference(solve(perturbed(problem, 0.01), GRID))
    inputs = estimate_inputs(problem, GRID, epsilon=0.01)
    assert check_bound(difference, dependence_bound_ivp(inputs, problem.psi, problem.alpha, GRID)).holds


@pytest.mark.parametrize("mu", [0.1, 0.01])
def test_parameter_dependence(mu: float) -> None:
    problem = _problem()
    first, second = parameter_pair(problem, mu, 0.0, [1.0])
    difference = solve(first, GRID, tol=TIGHT).difference(solve(second, GRID, tol=TIGHT))
    inputs = estimate_inputs(problem, GRID, mu=mu, mu0=0.0, direction=[1.0])
    curve = parameter_dependence_integral(inputs, problem.psi, problem.alpha, GRID)
    assert curve.metadata["gap"] == pytest.approx(mu)
    assert check_bound(difference, curve).holds


def test_parameter_dependence_of_initial_value_problem() -> None:
    problem = _problem("ivp", beta=1.0, x0=[0.2])
    first, second = parameter_pair(problem, 0.1, 0.0, [1.0])
    difference = solve(first, GRID, tol=TIGHT).difference(solve(second, GRID, tol=TIGHT))
    inputs = estimate_inputs(problem, GRID, mu=0.1, direction=[1.0])
    curve = parameter_dependence_ivp(inputs, problem.psi, problem.alpha, GRID)
    assert curve.metadata["constant_used"] == "Q_bar"
    assert curve.metadata["q_discrepancy"]
    assert check_bound(difference, curve).holds


def test_check_bound_reports_violations() -> None:
    trace = SolutionTrace(GRID, np.ones(129))
    tight = BoundCurve(GRID, np.full(129, 0.5), "test")
    result = check_bound(trace, tight)
    assert not result.holds
    assert result.violations == 129
    assert result.worst_margin == pytest.approx(2.0)

    loose = BoundCurve(GRID, np.full(129, 2.0), "test")
    assert check_bound(trace, loose).holds

    with pytest.raises(DomainError):
        check_bound(trace, BoundCurve(Grid.build(0.0, 1.0, 64), np.ones(65), "test"))


def test_check_bound_skips_unasserted_nodes() -> None:
    values = np.ones(129)
    values[0] = 10.0
    include = np.ones(129, dtype=bool)
    include[0] = False
    curve = BoundCurve(GRID, np.ones(129), "test", include=include)
    assert check_bound(SolutionTrace(GRID, values), curve).holds


def test_integral_forms_need_contractive_constant() -> None:
    inputs = EstimateInputs(N_const=1.0, C1=1.0)
    with pytest.raises(DomainError):
        apriori_bound_integral(inputs, PsiFunction.identity(), 0.5, GRID)
    with pytest.raises(DomainError):
        EstimateInputs(C1=-1.0)


def test_singular_problem_has_infinite_start_constant() -> None:
    problem = _problem("ivp", beta=0.0, x0=[1.0])
    inputs = estimate_inputs(problem, GRID)
    assert not inputs.report["C2_finite"]


def test_check_bound_without_asserted_nodes_reports_nan() -> None:
    include = np.zeros(129, dtype=bool)
    curve = BoundCurve(GRID, np.ones(129), "test", include=include)
    result = check_bound(SolutionTrace(GRID, np.full(129, 5.0)), curve)
    assert result.holds
    assert math.isnan(result.worst_margin) and math.isnan(result.worst_node)
    assert result.violations == 0 and result.checked_nodes == 0

    asserted = check_bound(SolutionTrace(GRID, np.ones(129)), BoundCurve(GRID, np.ones(129), "test"))
    assert asserted.checked_nodes == 129
