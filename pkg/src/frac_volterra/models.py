#!/usr/bin/env python3
"""
Data models shared by the solver, the bound evaluators and the exporters.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from .core.psi_core import Grid
from .errors import DomainError


@dataclass
class SolutionTrace:
    """Vector samples of a function on a grid.

    Attributes:
        grid: Grid the samples live on
        values: Array of shape (N + 1, n)
        singular_endpoint: Node 0 is a placeholder (the function blows up at a)
        endpoint_exponent: e such that values behave like (psi(t) - psi(a))^e near a
        history: Successive weighted distances of a Picard run
        residual: d(x, Tx) of the final iterate, nan if not computed
        iterations: Picard iterations performed
        converged: Whether the Picard run met its tolerance
    """

    grid: Grid
    values: np.ndarray
    singular_endpoint: bool = False
    endpoint_exponent: Optional[float] = None
    history: List[float] = field(default_factory=list)
    residual: float = float("nan")
    iterations: int = 0
    converged: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] != self.grid.n + 1:
            raise DomainError(
                f"trace needs {self.grid.n + 1} rows of samples, got shape {values.shape}"
            )
        self.values = values
        if self.endpoint_exponent is not None and self.endpoint_exponent < 0:
            self.singular_endpoint = True

    @classmethod
    def from_function(
        cls,
        grid: Grid,
        func: Callable[[np.ndarray], np.ndarray],
        endpoint_exponent: Optional[float] = None,
    ) -> "SolutionTrace":
        """
        Sample func at the grid nodes.

        With a negative endpoint_exponent node 0 is not evaluated and holds 0.
        """
        singular = endpoint_exponent is not None and endpoint_exponent < 0
        nodes = grid.nodes[1:] if singular else grid.nodes
        sampled = np.asarray(func(nodes), dtype=float)
        if sampled.ndim == 1:
            sampled = sampled.reshape(-1, 1)
        if singular:
            sampled = np.vstack([np.zeros((1, sampled.shape[1])), sampled])
        return cls(grid, sampled, singular, endpoint_exponent)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def norms(self) -> np.ndarray:
        """Euclidean norm of the sample at each node."""
        return np.linalg.norm(self.values, axis=1)

    def included_mask(self) -> np.ndarray:
        """Nodes that carry a genuine value."""
        mask = np.ones(self.grid.n + 1, dtype=bool)
        if self.singular_endpoint:
            mask[0] = False
        return mask

    def difference(self, other: "SolutionTrace") -> "SolutionTrace":
        """Pointwise self - other on the shared grid."""
        if not self.grid.same_as(other.grid):
            raise DomainError("traces live on different grids")
        if self.values.shape != other.values.shape:
            raise DomainError(
                f"trace shapes differ: {self.values.shape} vs {other.values.shape}"
            )
        singular = self.singular_endpoint or other.singular_endpoint
        values = self.values - other.values
        if singular:
            values[0] = 0.0
        return SolutionTrace(self.grid, values, singular_endpoint=singular)

    def with_values(self, values: np.ndarray) -> "SolutionTrace":
        """Copy of this trace's endpoint metadata with new samples."""
        return SolutionTrace(
            self.grid, values, self.singular_endpoint, self.endpoint_exponent
        )


@dataclass
class BoundCurve:
    """An upper bound sampled on a grid.

    Attributes:
        grid: Grid the bound lives on
        values: Bound at each node, shape (N + 1,)
        provenance: Name of the estimate that produced it
        metadata: Constants and diagnostics behind the curve
        include: Nodes where the bound is asserted
    """

    grid: Grid
    values: np.ndarray
    provenance: str
    metadata: Dict[str, Any] = field(default_factory=dict)
    include: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.shape[0] != self.grid.n + 1:
            raise DomainError("bound curve length does not match its grid")
        if self.include is None:
            self.include = np.ones(self.grid.n + 1, dtype=bool)
        else:
            self.include = np.asarray(self.include, dtype=bool)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values[self.include])))


@dataclass
class BoundCheck:
    """Outcome of comparing a trace norm against a bound curve.

    Attributes:
        holds: Whether ||x(t_i)|| <= bound(t_i) at every asserted node
        worst_margin: Largest ratio ||x(t_i)|| / bound(t_i), nan if no node is asserted
        worst_node: Node where worst_margin is attained
        violations: Number of asserted nodes where the bound fails
        checked_nodes: Number of asserted nodes
    """

    holds: bool
    worst_margin: float
    worst_node: float
    violations: int = 0
    checked_nodes: int = 0


@dataclass(frozen=True)
class ContractionCertificate:
    """Constants of the weighted-space contraction argument.

    Attributes:
        M: Lipschitz constant of f
        L: Lipschitz constant of the inner kernel
        delta: Free parameter, delta > 1
        xi: Weight rate, always L * delta
        q_integral: Contraction factor of the integral-equation operator
        q_ivp: Contraction factor of the initial-value operator
        d_value: Grid estimate of the distance between the start iterate and its image
        d_node: Node where d_value is attained
        d_finite: Whether the distance is finite
    """

    M: float
    L: float
    delta: float
    xi: float
    q_integral: float
    q_ivp: float
    d_value: float = float("nan")
    d_node: float = float("nan")
    d_finite: bool = True

    @property
    def contractive_integral(self) -> bool:
        return self.q_integral < 1.0

    @property
    def contractive_ivp(self) -> bool:
        return self.q_ivp < 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "M": self.M,
            "L": self.L,
            "delta": self.delta,
            "xi": self.xi,
            "q_integral": self.q_integral,
            "q_ivp": self.q_ivp,
            "contractive_integral": self.contractive_integral,
            "contractive_ivp": self.contractive_ivp,
            "d_value": self.d_value,
            "d_node": self.d_node,
            "d_finite": self.d_finite,
        }
