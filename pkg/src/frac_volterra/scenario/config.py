#!/usr/bin/env python3
"""
Scenario configuration.

A scenario is one JSON file with nested sections. Parsing re-validates
every cross-field rule of the library and reports failures as ConfigError
with the dotted key path (e.g. 'space.delta').
"""

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from ..core.frac_calculus import verification_grading
from ..core.psi_core import DEFAULT_GRADING, DEFAULT_NODES, PsiFunction
from ..core.solver import DEFAULT_DELTA, DEFAULT_MAX_ITER, DEFAULT_TOL, Lipschitz, Problem
from ..errors import ConfigError, DomainError
from .registry import ForcingSpec, KernelSpec, RhsSpec, build_problem, kernel_lipschitz

PIPELINES = ("solve", "bounds", "gronwall", "verify", "depend")
ESTIMATES = {
    "apriori-integral": "integral",
    "apriori-ivp": "ivp",
    "dependence-integral": "integral",
    "dependence-ivp": "ivp",
    "parameter-integral": "integral",
    "parameter-ivp": "ivp",
}
# Numbered names accepted for the estimates
ESTIMATE_ALIASES = {
    "3": "apriori-integral",
    "4": "apriori-ivp",
    "7": "dependence-integral",
    "8": "dependence-ivp",
    "9": "parameter-integral",
    "10": "parameter-ivp",
}
VERIFY_CHECKS = ("ml-integral", "composition")
VERIFY_CHECK_ALIASES = {"lemma1": "ml-integral"}
VERIFY_FUNCTIONS = ("power", "ml", "zero")
GRONWALL_MODES = ("series", "ml", "nested")
GRONWALL_MODE_ALIASES = {"lemma4": "series", "corollary1": "ml", "lemma5": "nested"}
PROFILE_KINDS = ("constant", "random")

DEFAULT_OUTPUTS = {
    "trace": "trace.csv",
    "convergence": "convergence.csv",
    "bounds": "bounds.csv",
    "gronwall": "gronwall.csv",
    "verify": "verify.csv",
    "depend": "depend.csv",
    "summary": "summary.json",
}


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _section(raw: Dict[str, Any], name: str, path: str = "") -> Dict[str, Any]:
    full = _join(path, name)
    value = raw.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(full, "must be a section (JSON object)")
    return value


def _number(
    section: Dict[str, Any],
    key: str,
    path: str,
    default: Optional[float] = None,
) -> float:
    full = _join(path, key)
    if key not in section:
        if default is None:
            raise ConfigError(full, "is required")
        return float(default)
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(full, f"must be a number, got {value!r}")
    return float(value)


def _integer(section: Dict[str, Any], key: str, path: str, default: int) -> int:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(_join(path, key), f"must be an integer, got {value!r}")
    return value


def _choice(
    section: Dict[str, Any], key: str, path: str, options, default: str,
    aliases: Optional[Dict[str, str]] = None,
) -> str:
    value = section.get(key, default)
    if aliases and isinstance(value, str):
        value = aliases.get(value, value)
    if value not in options:
        raise ConfigError(_join(path, key), f"must be one of {', '.join(options)}, got {value!r}")
    return value


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise ConfigError(path, message)


@dataclass(frozen=True)
class ProblemConfig:
    kind: str
    dimension: int
    alpha: float
    beta: float
    x0: Tuple[float, ...]
    f: RhsSpec
    k: KernelSpec
    M: float
    L: float


@dataclass(frozen=True)
class GridConfig:
    n: int
    grading_q: Optional[float]

    def grading_for(self, alpha: float, verification: bool = False) -> float:
        if self.grading_q is not None:
            return self.grading_q
        return verification_grading(alpha) if verification else DEFAULT_GRADING


@dataclass(frozen=True)
class SolverConfig:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER


@dataclass(frozen=True)
class BoundsConfig:
    estimates: Tuple[str, ...] = ()


@dataclass(frozen=True)
class VerifyConfig:
    check: str = "ml-integral"
    alpha: float = 0.5
    beta: float = 1.0
    xi: float = 1.0
    function: str = "power"
    tolerance: float = 1e-4


@dataclass(frozen=True)
class GronwallConfig:
    mode: str = "ml"
    k_max: int = 40
    alpha: float = 0.5
    profile_kind: str = "constant"
    profile: Dict[str, float] = field(default_factory=dict)
    instances: int = 100


@dataclass(frozen=True)
class DependConfig:
    epsilons: Tuple[float, ...] = (0.1, 0.01, 0.001)
    mu: float = 0.1
    mu0: float = 0.0
    q0: Tuple[float, ...] = ()


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario; `raw` is the effective JSON document."""

    pipeline: str
    raw: Dict[str, Any]
    psi: PsiFunction
    a: float
    b: float
    grid: GridConfig
    delta: float
    solver: SolverConfig
    problem: Optional[ProblemConfig] = None
    bounds: BoundsConfig = field(default_factory=BoundsConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    gronwall: GronwallConfig = field(default_factory=GronwallConfig)
    depend: DependConfig = field(default_factory=DependConfig)
    outputs: Dict[str, str] = field(default_factory=lambda: dict(DEFAULT_OUTPUTS))

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)

    @property
    def xi(self) -> float:
        L = self.problem.L if self.problem is not None else 1.0
        return L * self.delta

    def build_problem(self) -> Problem:
        if self.problem is None:
            raise ConfigError("problem", f"is required for the {self.pipeline} pipeline")
        p = self.problem
        return build_problem(
            p.f, p.k, p.alpha, self.psi, self.a, self.b,
            dimension=p.dimension, kind=p.kind, beta=p.beta, x0=p.x0,
            lipschitz=Lipschitz(p.M, p.L),
        )


def config_hash(raw: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form."""
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _parse_psi(raw: Dict[str, Any], a: float, b: float) -> PsiFunction:
    section = _section(raw, "psi")
    family = _choice(section, "family", "psi", ("identity", "power", "logarithm", "exponential"), "identity")
    rho = _number(section, "rho", "psi", 1.0)
    sigma = _number(section, "sigma", "psi", 1.0)
    _require(rho > 0, "psi.rho", f"must be positive, got {rho}")
    _require(sigma > 0, "psi.sigma", f"must be positive, got {sigma}")
    psi = PsiFunction(family, rho=rho, sigma=sigma)
    try:
        psi.check_admissible(a, b)
    except DomainError as exc:
        raise ConfigError("psi.family", str(exc)) from exc
    return psi


def _parse_problem(raw: Dict[str, Any]) -> Optional[ProblemConfig]:
    if "problem" not in raw:
        return None
    section = _section(raw, "problem")
    path = "problem"
    kind = _choice(section, "kind", path, ("integral", "ivp"), "integral")
    dimension = _integer(section, "dimension", path, 1)
    _require(dimension >= 1, f"{path}.dimension", f"must be at least 1, got {dimension}")
    alpha = _number(section, "alpha", path)
    _require(0 < alpha <= 1, f"{path}.alpha", f"must lie in (0, 1], got {alpha}")
    beta = _number(section, "beta", path, 1.0)
    _require(0 <= beta <= 1, f"{path}.beta", f"must lie in [0, 1], got {beta}")

    x0_raw = section.get("x0", [0.0] * dimension)
    _require(
        isinstance(x0_raw, list) and len(x0_raw) == dimension
        and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in x0_raw),
        f"{path}.x0", f"must be a list of {dimension} numbers",
    )

    f_section = _section(section, "f", path)
    g_section = _section(f_section, "forcing", f"{path}.f")
    try:
        forcing = ForcingSpec(
            kind=_choice(g_section, "kind", f"{path}.f.forcing", ("const", "power", "ml_weight"), "const"),
            value=_number(g_section, "value", f"{path}.f.forcing", 0.0),
            exponent=_number(g_section, "exponent", f"{path}.f.forcing", 1.0),
            rate=_number(g_section, "rate", f"{path}.f.forcing", 1.0),
        )
    except DomainError as exc:
        raise ConfigError(f"{path}.f.forcing", str(exc)) from exc
    f_spec = RhsSpec(
        family=_choice(f_section, "family", f"{path}.f", ("affine", "bounded"), "affine"),
        scale=_number(f_section, "scale", f"{path}.f", 0.0),
        coupling=_number(f_section, "coupling", f"{path}.f", 0.0),
        forcing=forcing,
    )

    k_section = _section(section, "k", path)
    k_spec = KernelSpec(
        family=_choice(k_section, "family", f"{path}.k", ("linear", "bounded"), "linear"),
        lipschitz=_number(k_section, "lipschitz", f"{path}.k", 0.0),
    )

    # declared constants may be larger than the family constants, never smaller
    declared = _section(section, "lipschitz", path)
    M = _number(declared, "M", f"{path}.lipschitz", f_spec.lipschitz)
    L = _number(declared, "L", f"{path}.lipschitz", kernel_lipschitz(k_spec))
    _require(M >= f_spec.lipschitz, f"{path}.lipschitz.M",
             f"must be at least the family constant {f_spec.lipschitz:g}")
    _require(L >= abs(k_spec.lipschitz) and L > 0, f"{path}.lipschitz.L",
             f"must be positive and at least the family constant {abs(k_spec.lipschitz):g}")

    return ProblemConfig(kind, dimension, alpha, beta, tuple(float(c) for c in x0_raw),
                         f_spec, k_spec, M, L)


def _parse_space(raw: Dict[str, Any], problem: Optional[ProblemConfig]) -> float:
    section = _section(raw, "space")
    L = problem.L if problem is not None else 1.0
    if "xi" in section:
        xi = _number(section, "xi", "space")
        _require(xi > 0, "space.xi", f"must be positive, got {xi}")
        delta = xi / L
        if "delta" in section:
            given = _number(section, "delta", "space")
            _require(abs(given * L - xi) <= 1e-12 * xi, "space.xi", "must equal L * delta")
        _require(delta > 1, "space.xi", f"must exceed L = {L:g} (delta = xi / L > 1)")
        return delta
    delta = _number(section, "delta", "space", DEFAULT_DELTA)
    _require(delta > 1, "space.delta", f"must exceed 1, got {delta:g}")
    return delta


def _parse_outputs(raw: Dict[str, Any]) -> Dict[str, str]:
    section = _section(raw, "outputs")
    outputs = dict(DEFAULT_OUTPUTS)
    for key, value in section.items():
        _require(key in DEFAULT_OUTPUTS, f"outputs.{key}", "is not a known output")
        _require(isinstance(value, str) and value != "" and not os.path.isabs(value),
                 f"outputs.{key}", "must be a relative file name")
        outputs[key] = value
    return outputs


def canonical_estimate(name: Any) -> Any:
    """Estimate name for a numbered alias (3, "3", ...); other values pass through."""
    if isinstance(name, int) and not isinstance(name, bool):
        name = str(name)
    if isinstance(name, str):
        return ESTIMATE_ALIASES.get(name, name)
    return name


def _parse_bounds(raw: Dict[str, Any], problem: Optional[ProblemConfig]) -> BoundsConfig:
    section = _section(raw, "bounds")
    requested = section.get("estimates", section.get("estimate", []))
    if isinstance(requested, (str, int)) and not isinstance(requested, bool):
        requested = [requested]
    _require(isinstance(requested, list), "bounds.estimates", "must be a list of estimate names")
    requested = [canonical_estimate(name) for name in requested]
    for name in requested:
        _require(name in ESTIMATES, "bounds.estimates", f"unknown estimate {name!r}")
        if problem is not None:
            _require(ESTIMATES[name] == problem.kind, "bounds.estimates",
                     f"{name} does not apply to a {problem.kind} problem")
    return BoundsConfig(tuple(requested))


def _parse_verify(raw: Dict[str, Any]) -> VerifyConfig:
    section = _section(raw, "verify")
    path = "verify"
    check = _choice(section, "check", path, VERIFY_CHECKS, "ml-integral", VERIFY_CHECK_ALIASES)
    alpha = _number(section, "alpha", path, 0.5)
    _require(0 < alpha <= 1, f"{path}.alpha", f"must lie in (0, 1], got {alpha}")
    beta = _number(section, "beta", path, 1.0)
    _require(0 <= beta <= 1, f"{path}.beta", f"must lie in [0, 1], got {beta}")
    xi = _number(section, "xi", path, 1.0)
    _require(xi > 0, f"{path}.xi", f"must be positive, got {xi}")
    default_tol = 1e-4 if check == "ml-integral" else 1e-2
    tolerance = _number(section, "tolerance", path, default_tol)
    _require(tolerance > 0, f"{path}.tolerance", "must be positive")
    function = _choice(section, "function", path, VERIFY_FUNCTIONS, "power")
    return VerifyConfig(check, alpha, beta, xi, function, tolerance)


def _parse_gronwall(raw: Dict[str, Any]) -> GronwallConfig:
    section = _section(raw, "gronwall")
    path = "gronwall"
    mode = _choice(section, "mode", path, GRONWALL_MODES, "ml", GRONWALL_MODE_ALIASES)
    k_max = _integer(section, "k_max", path, 40)
    _require(k_max >= 1, f"{path}.k_max", f"must be at least 1, got {k_max}")
    alpha = _number(section, "alpha", path, 0.5)
    _require(0 < alpha <= 1, f"{path}.alpha", f"must lie in (0, 1], got {alpha}")

    profile_section = _section(section, "profile", path)
    kind = _choice(profile_section, "kind", f"{path}.profile", PROFILE_KINDS, "constant")
    profile = {}
    for key in ("v", "g", "r", "p", "g_tilde"):
        value = _number(profile_section, key, f"{path}.profile", 0.0)
        _require(value >= 0, f"{path}.profile.{key}", f"must be nonnegative, got {value}")
        profile[key] = value
    instances = _integer(profile_section, "instances", f"{path}.profile", 100)
    _require(instances >= 1, f"{path}.profile.instances", "must be at least 1")
    return GronwallConfig(mode, k_max, alpha, kind, profile, instances)


def _parse_depend(raw: Dict[str, Any], problem: Optional[ProblemConfig]) -> DependConfig:
    section = _section(raw, "depend")
    path = "depend"
    epsilons = section.get("epsilons", [0.1, 0.01, 0.001])
    if isinstance(epsilons, (int, float)) and not isinstance(epsilons, bool):
        epsilons = [epsilons]
    _require(
        isinstance(epsilons, list) and len(epsilons) > 0
        and all(isinstance(e, (int, float)) and not isinstance(e, bool) and e > 0 for e in epsilons),
        f"{path}.epsilons", "must be a nonempty list of positive numbers",
    )
    mu = _number(section, "mu", path, 0.1)
    mu0 = _number(section, "mu0", path, 0.0)
    dimension = problem.dimension if problem is not None else 1
    q0 = section.get("q0", [1.0 / dimension ** 0.5] * dimension)
    _require(isinstance(q0, list) and len(q0) == dimension, f"{path}.q0",
             f"must be a list of {dimension} numbers")
    return DependConfig(tuple(float(e) for e in epsilons), mu, mu0, tuple(float(c) for c in q0))


def parse_config(raw: Dict[str, Any]) -> ScenarioConfig:
    """
    Validate a raw JSON document into a ScenarioConfig.

    Raises:
        ConfigError: naming the dotted path of the first invalid field
    """
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "scenario must be a JSON object")
    pipeline = _choice(raw, "pipeline", "", PIPELINES, "solve")

    interval = _section(raw, "interval")
    a = _number(interval, "a", "interval", 0.0)
    b = _number(interval, "b", "interval", 1.0)
    _require(b > a, "interval.b", f"must exceed interval.a = {a:g}")

    grid_section = _section(raw, "grid")
    n = _integer(grid_section, "n", "grid", DEFAULT_NODES)
    _require(n >= 2, "grid.n", f"must be at least 2, got {n}")
    grading_q = None
    if "grading_q" in grid_section:
        grading_q = _number(grid_section, "grading_q", "grid")
        _require(grading_q >= 1, "grid.grading_q", f"must be at least 1, got {grading_q}")

    psi = _parse_psi(raw, a, b)
    problem = _parse_problem(raw)
    if pipeline in ("solve", "bounds", "depend"):
        _require(problem is not None, "problem", f"is required for the {pipeline} pipeline")

    solver_section = _section(raw, "solver")
    tol = _number(solver_section, "tol", "solver", DEFAULT_TOL)
    _require(tol > 0, "solver.tol", f"must be positive, got {tol}")
    max_iter = _integer(solver_section, "max_iter", "solver", DEFAULT_MAX_ITER)
    _require(max_iter >= 1, "solver.max_iter", f"must be at least 1, got {max_iter}")

    return ScenarioConfig(
        pipeline=pipeline,
        raw=copy.deepcopy(raw),
        psi=psi,
        a=a,
        b=b,
        grid=GridConfig(n, grading_q),
        delta=_parse_space(raw, problem),
        solver=SolverConfig(tol, max_iter),
        problem=problem,
        bounds=_parse_bounds(raw, problem),
        verify=_parse_verify(raw),
        gronwall=_parse_gronwall(raw),
        depend=_parse_depend(raw, problem),
        outputs=_parse_outputs(raw),
    )


def load_raw(path: str) -> Dict[str, Any]:
    """Read a scenario JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError("--config", f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON in {path}: {exc}") from exc


def apply_overrides(raw: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Copy of raw with dotted-path values replaced, skipping None values."""
    merged = copy.deepcopy(raw)
    for dotted, value in overrides.items():
        if value is None:
            continue
        keys = dotted.split(".")
        node = merged
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value
    return merged


def load_config(path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
    """Load, apply CLI overrides and validate a scenario."""
    raw: Dict[str, Any] = load_raw(path) if path else {}
    return parse_config(apply_overrides(raw, overrides or {}))


def expected_estimates(config: ScenarioConfig) -> List[str]:
    """Requested estimates, or the a-priori estimate of the problem kind."""
    if config.bounds.estimates:
        return list(config.bounds.estimates)
    kind = config.problem.kind if config.problem is not None else "integral"
    return [f"apriori-{kind}"]
