#!/usr/bin/env python3
"""
Scenario Runner Module

Executes one scenario pipeline and writes its artifacts:
- solve:    Picard solution, contraction certificate, convergence log
- bounds:   solution checked against a-priori / dependence estimates
- depend:   perturbation and parameter experiments with scaling check
- gronwall: extremal solutions against the Gronwall bounds
- verify:   closed-form and composition identities of the operators
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core import analysis
from ..core.frac_calculus import (
    OperatorParams,
    initial_weighted_value,
    verify_composition,
    verify_lemma1,
)
from ..core.gronwall import (
    GronwallData,
    extremal_solve,
    ml_bound,
    nested_ml_bound,
    random_gronwall_data,
    series_bound,
)
from ..core.psi_core import Grid, psi_increments
from ..core.solver import (
    IvpProblem,
    Problem,
    contraction_certificate,
    solve,
    space_for,
    spot_check_lipschitz,
)
from ..core.special_functions import mittag_leffler
from ..errors import ConfigError, DivergenceError, DomainError, FracVolterraError, MittagLefflerOverflow
from ..log import get_logger
from ..models import SolutionTrace
from .config import ScenarioConfig, expected_estimates, load_config
from .export import (
    bound_rows,
    check_to_dict,
    format_summary,
    write_convergence,
    write_csv,
    write_summary,
    write_trace,
)
from .registry import parameter_pair, perturbed

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_OVERFLOW = 4

# Observed sup differences must scale with epsilon within this factor
SCALING_FACTOR = 2.0
# Solves entering a difference experiment stop at most at this tolerance
DIFFERENCE_TOL = 1e-13
# Orders of the random Gronwall instances; small orders may overflow the bounds
RANDOM_ALPHA_RANGE = (0.1, 1.0)

ESTIMATE_FUNCTIONS = {
    "apriori-integral": analysis.apriori_bound_integral,
    "apriori-ivp": analysis.apriori_bound_ivp,
    "dependence-integral": analysis.dependence_bound_integral,
    "dependence-ivp": analysis.dependence_bound_ivp,
    "parameter-integral": analysis.parameter_dependence_integral,
    "parameter-ivp": analysis.parameter_dependence_ivp,
}

Result = Tuple[bool, str, Dict[str, Any]]


def exit_code_for(error: BaseException) -> int:
    """Process exit code of a library error."""
    if isinstance(error, (ConfigError, DomainError)):
        return EXIT_CONFIG
    if isinstance(error, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(error, (MittagLefflerOverflow, OverflowError)):
        return EXIT_OVERFLOW
    return EXIT_CHECK_FAILED


def _banner(title: str) -> str:
    return "\n" + "=" * 60 + "\n" + title + "\n" + "=" * 60


@dataclass
class RunContext:
    """Output location and switches shared by the pipeline steps."""

    config: ScenarioConfig
    out_dir: str
    seed: int = 0
    verbose: bool = False

    def path(self, key: str) -> str:
        return os.path.join(self.out_dir, self.config.outputs[key])

    def say(self, text: str) -> None:
        if self.verbose:
            print(text)

    def meta(self, alpha: float, beta: float, xi: float) -> Dict[str, Any]:
        return {
            "config_hash": self.config.config_hash,
            "alpha": alpha,
            "beta": beta,
            "gamma": alpha + beta * (1.0 - alpha),
            "xi": xi,
            "delta": self.config.delta,
            "psi": self.config.psi.family,
        }


def _problem_meta(ctx: RunContext, problem: Problem) -> Dict[str, Any]:
    beta = problem.beta if isinstance(problem, IvpProblem) else 1.0
    return ctx.meta(problem.alpha, beta, problem.lipschitz.L * ctx.config.delta)


def _solver_grid(ctx: RunContext, alpha: float) -> Grid:
    cfg = ctx.config
    return Grid.build(cfg.a, cfg.b, cfg.grid.n, cfg.grid.grading_for(alpha))


def _solve(ctx: RunContext, problem: Problem, grid: Grid, tol: Optional[float] = None) -> SolutionTrace:
    cfg = ctx.config
    tol = cfg.solver.tol if tol is None else tol
    return solve(problem, grid, tol=tol, max_iter=cfg.solver.max_iter, delta=cfg.delta)


def _difference_solve(ctx: RunContext, problem: Problem, grid: Grid) -> SolutionTrace:
    return _solve(ctx, problem, grid, min(ctx.config.solver.tol, DIFFERENCE_TOL))


def _solve_pipeline(ctx: RunContext) -> Tuple[Dict[str, Any], Dict[str, bool]]:
    cfg = ctx.config
    problem = cfg.build_problem()
    grid = _solver_grid(ctx, problem.alpha)

    ctx.say(_banner("CONTRACTION CERTIFICATE"))
    spot = spot_check_lipschitz(problem, seed=ctx.seed)
    certificate = contraction_certificate(problem, cfg.delta, grid)
    for key, value in certificate.to_dict().items():
        ctx.say(f"  {key}: {value}")

    ctx.say(_banner("PICARD ITERATION"))
    trace = _solve(ctx, problem, grid)
    ctx.say(f"  Iterations: {trace.iterations}")
    ctx.say(f"  Converged: {trace.converged}")
    ctx.say(f"  Residual: {trace.residual:.3e}")

    meta = _problem_meta(ctx, problem)
    write_trace(ctx.path("trace"), trace, space_for(problem, cfg.delta), meta)
    write_convergence(ctx.path("convergence"), trace.history, meta)

    summary: Dict[str, Any] = {
        "problem": {"kind": problem.kind, **problem.descriptor},
        "certificate": certificate.to_dict(),
        "iterations": trace.iterations,
        "converged": trace.converged,
        "residual": trace.residual,
        "lipschitz_spot_check": spot,
    }
    if isinstance(problem, IvpProblem) and problem.singular:
        weighted = initial_weighted_value(problem.psi, 1.0 - problem.gamma, trace)
        summary["weighted_initial_value"] = weighted
        summary["weighted_initial_error"] = float(np.max(np.abs(weighted - np.asarray(problem.x0))))
        ctx.say(f"  Weighted initial value: {weighted}")

    checks = {"converged": trace.converged, "lipschitz": bool(spot["holds"])}
    return summary, checks


def _estimate_experiment(
    ctx: RunContext,
    name: str,
    problem: Problem,
    grid: Grid,
    base: SolutionTrace,
    epsilon: float,
) -> Tuple[SolutionTrace, Any, analysis.EstimateInputs]:
    """(trace to check, bound curve, constants) of one estimate."""
    depend = ctx.config.depend
    if name.startswith("apriori"):
        inputs = analysis.estimate_inputs(problem, grid)
        checked = base
    elif name.startswith("dependence"):
        reference = _difference_solve(ctx, problem, grid)
        other = _difference_solve(ctx, perturbed(problem, epsilon), grid)
        inputs = analysis.estimate_inputs(problem, grid, epsilon=epsilon)
        checked = reference.difference(other)
    else:
        first, second = parameter_pair(problem, depend.mu, depend.mu0, depend.q0)
        z1 = _difference_solve(ctx, first, grid)
        z2 = _difference_solve(ctx, second, grid)
        inputs = analysis.estimate_inputs(
            problem, grid, mu=depend.mu, mu0=depend.mu0, direction=depend.q0
        )
        checked = z1.difference(z2)
    curve = ESTIMATE_FUNCTIONS[name](inputs, problem.psi, problem.alpha, grid)
    return checked, curve, inputs


def _asserted(inputs: analysis.EstimateInputs, name: str) -> bool:
    """An a-priori curve is only asserted when its constant is finite."""
    if name == "apriori-ivp":
        return bool(inputs.report.get("C2_finite", True))
    if name == "apriori-integral":
        return bool(inputs.report.get("C1_finite", True))
    return True


def _bounds_pipeline(ctx: RunContext) -> Tuple[Dict[str, Any], Dict[str, bool]]:
    cfg = ctx.config
    problem = cfg.build_problem()
    grid = _solver_grid(ctx, problem.alpha)
    spot = spot_check_lipschitz(problem, seed=ctx.seed)

    ctx.say(_banner("SOLVING"))
    base = _solve(ctx, problem, grid)
    ctx.say(f"  Iterations: {base.iterations}, residual {base.residual:.3e}")

    rows: List[List[Any]] = []
    summary: Dict[str, Any] = {
        "problem": {"kind": problem.kind, **problem.descriptor},
        "certificate": contraction_certificate(problem, cfg.delta, grid).to_dict(),
        "lipschitz_spot_check": spot,
        "estimates": {},
    }
    checks = {"converged": base.converged, "lipschitz": bool(spot["holds"])}

    ctx.say(_banner("ESTIMATES"))
    for name in expected_estimates(cfg):
        checked, curve, inputs = _estimate_experiment(
            ctx, name, problem, grid, base, cfg.depend.epsilons[0]
        )
        verdict = analysis.check_bound(checked, curve)
        asserted = _asserted(inputs, name)
        rows.extend(bound_rows(checked, curve, prefix=[name]))
        summary["estimates"][name] = {
            **check_to_dict(verdict),
            "asserted": asserted,
            "constants": {**curve.metadata, **inputs.report},
        }
        if asserted:
            checks[name] = verdict.holds
        ctx.say(f"  {name}: holds={verdict.holds} worst margin {verdict.worst_margin:.6g}")

    write_csv(
        ctx.path("bounds"), ["estimate", "t", "value", "bound", "margin"], rows,
        _problem_meta(ctx, problem),
    )
    return summary, checks


def _depend_pipeline(ctx: RunContext) -> Tuple[Dict[str, Any], Dict[str, bool]]:
    cfg = ctx.config
    problem = cfg.build_problem()
    grid = _solver_grid(ctx, problem.alpha)

    ctx.say(_banner("CONTINUOUS DEPENDENCE"))
    base = _solve(ctx, problem, grid)
    name = f"dependence-{problem.kind}"
    rows: List[List[Any]] = []
    experiments = []
    checks: Dict[str, bool] = {"converged": base.converged}

    for epsilon in cfg.depend.epsilons:
        difference, curve, _ = _estimate_experiment(ctx, name, problem, grid, base, epsilon)
        verdict = analysis.check_bound(difference, curve)
        sup_difference = float(np.max(difference.norms()[difference.included_mask()]))
        rows.extend(bound_rows(difference, curve, prefix=[epsilon]))
        experiments.append({"epsilon": epsilon, "sup_difference": sup_difference, **check_to_dict(verdict)})
        checks[f"{name}@{epsilon:g}"] = verdict.holds
        ctx.say(f"  eps={epsilon:g}: sup|x-y|={sup_difference:.6g} holds={verdict.holds}")

    scaling_ok = True
    for earlier, later in zip(experiments, experiments[1:]):
        if later["sup_difference"] == 0.0:
            continue
        observed = earlier["sup_difference"] / later["sup_difference"]
        expected = earlier["epsilon"] / later["epsilon"]
        if not expected / SCALING_FACTOR <= observed <= expected * SCALING_FACTOR:
            scaling_ok = False
    checks["linear_scaling"] = scaling_ok

    parameter_name = f"parameter-{problem.kind}"
    difference, curve, _ = _estimate_experiment(ctx, parameter_name, problem, grid, base, 0.0)
    parameter_verdict = analysis.check_bound(difference, curve)
    checks[parameter_name] = parameter_verdict.holds
    ctx.say(f"  {parameter_name}: holds={parameter_verdict.holds}")

    write_csv(
        ctx.path("depend"), ["epsilon", "t", "value", "bound", "margin"], rows,
        _problem_meta(ctx, problem),
    )
    summary = {
        "problem": {"kind": problem.kind, **problem.descriptor},
        "perturbations": experiments,
        "linear_scaling": scaling_ok,
        "parameter": {**check_to_dict(parameter_verdict), **curve.metadata},
    }
    return summary, checks


def _gronwall_pipeline(ctx: RunContext) -> Tuple[Dict[str, Any], Dict[str, bool]]:
    cfg = ctx.config
    settings = cfg.gronwall
    grid = Grid.build(cfg.a, cfg.b, cfg.grid.n, cfg.grid.grading_for(settings.alpha))
    meta = ctx.meta(settings.alpha, 1.0, math.nan)

    ctx.say(_banner(f"GRONWALL ({settings.mode}, {settings.profile_kind} profile)"))
    if settings.profile_kind == "random":
        return _gronwall_random(ctx, grid, meta)

    profile = settings.profile
    data = GronwallData.from_profiles(
        grid, cfg.psi, settings.alpha,
        v=profile["v"], g=profile["g"], r=profile["r"], p=profile["p"], g_tilde=profile["g_tilde"],
    )
    nan_column = np.full(grid.n + 1, math.nan)
    checks: Dict[str, bool] = {}
    summary: Dict[str, Any] = {"hypotheses": data.hypotheses()}

    if settings.mode == "nested":
        extremal = extremal_solve(data, "nested")
        nested = nested_ml_bound(data)
        columns = (nan_column, nested.values)
        checks["enclosure_nested"] = analysis.check_bound(extremal, nested).holds
    else:
        extremal = extremal_solve(data, "single")
        series = series_bound(data, settings.k_max)
        closed = ml_bound(data)
        columns = (series.values, closed.values)
        checks["enclosure_series"] = analysis.check_bound(extremal, series).holds
        checks["enclosure_ml"] = analysis.check_bound(extremal, closed).holds
        summary["series_terms"] = series.metadata["terms"]
        summary["series_last_term"] = series.metadata["last_term"]

    rows = [
        [float(t), float(u), float(s), float(b)]
        for t, u, s, b in zip(grid.nodes, extremal.values[:, 0], columns[0], columns[1])
    ]
    write_csv(ctx.path("gronwall"), ["t", "u_star", "bound_series", "bound_ml"], rows, meta)
    for key, value in checks.items():
        ctx.say(f"  {key}: {value}")
    return summary, checks


def check_random_instance(data: GronwallData, mode: str) -> Tuple[str, int, float]:
    """
    (status, violations, worst margin) of one random enclosure instance.

    A bound that exceeds double precision is reported with status
    'overflow' and no violations; the extremal solution is not compared.
    """
    try:
        bound = nested_ml_bound(data) if mode == "nested" else ml_bound(data)
    except MittagLefflerOverflow as exc:
        logger.info("Random instance with alpha=%g skipped: %s", data.alpha, exc)
        return "overflow", 0, math.nan
    verdict = analysis.check_bound(extremal_solve(data, mode), bound)
    return "checked", verdict.violations, verdict.worst_margin


def _gronwall_random(ctx: RunContext, grid: Grid, meta: Dict[str, Any]) -> Tuple[Dict[str, Any], Dict[str, bool]]:
    settings = ctx.config.gronwall
    rng = np.random.default_rng(ctx.seed)
    mode = "nested" if settings.mode == "nested" else "single"
    rows = []
    total_violations = 0
    overflow = 0
    worst = 0.0

    for instance in range(settings.instances):
        alpha = float(rng.uniform(*RANDOM_ALPHA_RANGE))
        data = random_gronwall_data(rng, grid, ctx.config.psi, alpha)
        status, violations, margin = check_random_instance(data, mode)
        total_violations += violations
        if status == "overflow":
            overflow += 1
        elif math.isfinite(margin):
            worst = max(worst, margin)
        rows.append([instance, alpha, status, violations, margin])

    write_csv(
        ctx.path("gronwall"), ["instance", "alpha", "status", "violations", "worst_margin"], rows, meta
    )
    ctx.say(
        f"  Instances: {settings.instances}, overflow: {overflow}, "
        f"violations: {total_violations}, worst margin {worst:.6g}"
    )
    summary = {
        "instances": settings.instances,
        "checked": settings.instances - overflow,
        "overflow": overflow,
        "alpha_range": list(RANDOM_ALPHA_RANGE),
        "violations": total_violations,
        "worst_margin": worst,
    }
    return summary, {"enclosure": total_violations == 0}


def _composition_samples(function: str, params: OperatorParams, grid: Grid) -> SolutionTrace:
    u = psi_increments(params.psi, grid)
    if function == "power":
        values = u**2
    elif function == "ml":
        values = np.asarray(mittag_leffler(params.alpha, u**params.alpha), dtype=float)
    else:
        values = np.zeros_like(u)
    return SolutionTrace(grid, values)


def _verify_pipeline(ctx: RunContext) -> Tuple[Dict[str, Any], Dict[str, bool]]:
    cfg = ctx.config
    settings = cfg.verify
    grid = Grid.build(cfg.a, cfg.b, cfg.grid.n, cfg.grid.grading_for(settings.alpha, verification=True))
    meta = ctx.meta(settings.alpha, settings.beta, settings.xi)
    label = cfg.psi.label

    ctx.say(_banner(f"VERIFY {settings.check}"))
    if settings.check == "ml-integral":
        error = verify_lemma1(settings.alpha, settings.xi, cfg.psi, grid)
        results = [("ml-integral", error)]
    else:
        params = OperatorParams(settings.alpha, settings.beta, cfg.psi, cfg.a)
        samples = _composition_samples(settings.function, params, grid)
        first, second = verify_composition(params, samples)
        results = [("derivative-of-integral", first), ("integral-of-derivative", second)]

    rows = [
        [check, settings.alpha, settings.beta, settings.xi, label, grid.n, residual]
        for check, residual in results
    ]
    write_csv(ctx.path("verify"), ["check", "alpha", "beta", "xi", "psi", "n", "residual"], rows, meta)

    checks = {check: residual <= settings.tolerance for check, residual in results}
    for check, residual in results:
        ctx.say(f"  {check}: {residual:.3e} (tolerance {settings.tolerance:g})")
    summary = {
        "residuals": dict(results),
        "tolerance": settings.tolerance,
        "grading_q": grid.grading_q,
        "n": grid.n,
    }
    return summary, checks


PIPELINES: Dict[str, Callable[[RunContext], Tuple[Dict[str, Any], Dict[str, bool]]]] = {
    "solve": _solve_pipeline,
    "bounds": _bounds_pipeline,
    "depend": _depend_pipeline,
    "gronwall": _gronwall_pipeline,
    "verify": _verify_pipeline,
}


def run_scenario(
    config: ScenarioConfig,
    out_dir: str,
    seed: int = 0,
    verbose: bool = False,
) -> Result:
    """
    Execute the configured pipeline and write its artifacts to out_dir.

    Args:
        config: Validated scenario
        out_dir: Output directory (created if missing)
        seed: Seed for randomized scenarios and spot checks
        verbose: Whether to print progress sections

    Returns:
        Tuple of (success: bool, message: str, details: dict); details
        carries 'exit_code', 'checks' and the run 'summary'
    """
    details: Dict[str, Any] = {
        "pipeline": config.pipeline,
        "config_hash": config.config_hash,
        "seed": seed,
        "checks": {},
        "summary": {},
        "exit_code": EXIT_OK,
    }
    ctx = RunContext(config, out_dir, seed, verbose)

    try:
        os.makedirs(out_dir, exist_ok=True)
        summary, checks = PIPELINES[config.pipeline](ctx)
    except FracVolterraError as exc:
        details["exit_code"] = exit_code_for(exc)
        details["error"] = str(exc)
        logger.error("%s pipeline failed: %s", config.pipeline, exc)
        _write_summary_safely(ctx, details)
        return False, str(exc), details

    details["summary"] = summary
    details["checks"] = checks
    failed = sorted(name for name, holds in checks.items() if not holds)
    if failed:
        details["exit_code"] = EXIT_CHECK_FAILED
        message = f"{config.pipeline}: checks failed: {', '.join(failed)}"
    else:
        message = f"{config.pipeline}: all {len(checks)} checks hold"

    _write_summary_safely(ctx, details)
    if verbose:
        print(_banner("SUMMARY"))
        print(format_summary(checks, "Checks:"))
    return not failed, message, details


def _write_summary_safely(ctx: RunContext, details: Dict[str, Any]) -> None:
    try:
        write_summary(ctx.path("summary"), details)
    except OSError as exc:
        logger.error("Could not write summary: %s", exc)


def run_config_file(
    path: str, out_dir: str, seed: int = 0, verbose: bool = False, overrides=None
) -> Result:
    """Load a scenario file and run it; configuration errors become exit code 2."""
    try:
        config = load_config(path, overrides)
    except ConfigError as exc:
        return False, str(exc), {"exit_code": EXIT_CONFIG, "error": str(exc), "field": exc.field}
    return run_scenario(config, out_dir, seed, verbose)


def run_batch(
    paths: Sequence[str], out_dir: str, seed: int = 0, workers: int = 4
) -> List[Tuple[str, Result]]:
    """
    Run several scenario files concurrently.

    Each scenario writes into its own sub-directory of out_dir named after
    the file stem. Results come back in input order.
    """
    used = set()
    targets = []
    for path in paths:
        stem = os.path.splitext(os.path.basename(path))[0]
        name, suffix = stem, 1
        while name in used:
            suffix += 1
            name = f"{stem}_{suffix}"
        used.add(name)
        targets.append((path, os.path.join(out_dir, name)))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(run_config_file, path, target, seed) for path, target in targets]
        return [(path, future.result()) for (path, _), future in zip(targets, futures)]
