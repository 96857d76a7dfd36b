"""Local convex costs, gradients and the centralized optimum oracle.

Only quadratic costs ship: they keep the optimum exact and the acceptance
checks deterministic.  Anything exposing ``value``, ``gradient`` and
``lipschitz_constant`` with the same shapes can be dropped in later.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError


@dataclass
class QuadraticCost:
    """f(theta) = 0.5 theta' H theta + g' theta + c with H symmetric PD."""

    H: np.ndarray
    g: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.H, dtype=float))
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        if h.shape[0] != h.shape[1]:
            raise DimensionError(f"H must be square, got {h.shape}")
        if not np.allclose(h, h.T, atol=1e-10):
            raise ValidationError("H must be symmetric")
        h = 0.5 * (h + h.T)
        if g.shape != (h.shape[0],):
            raise DimensionError(f"g has shape {g.shape}, expected ({h.shape[0]},)")
        eigs = np.linalg.eigvalsh(h)
        if eigs[0] <= 0:
            raise ValidationError(
                f"H must be positive definite (lambda_min = {eigs[0]:.3g})"
            )
        self.H = h
        self.g = g
        self.c = float(self.c)
        self._eigs = eigs

    @property
    def dim(self):
        return self.g.shape[0]

    @property
    def lipschitz_constant(self):
        return float(self._eigs[-1])

    @property
    def strong_convexity(self):
        return float(self._eigs[0])

    def value(self, theta) -> float:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return float(0.5 * theta @ self.H @ theta + self.g @ theta + self.c)

    def gradient(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return self.H @ theta + self.g


def evaluate_with_gradient(f: QuadraticCost, theta) -> tuple:
    """Cost value and gradient at theta."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (f.dim,):
        raise DimensionError(f"theta has shape {theta.shape}, expected ({f.dim},)")
    return f.value(theta), f.gradient(theta)


@dataclass
class CostSet:
    """Local costs of all agents, sharing one decision dimension."""

    costs: list

    def __post_init__(self):
        if not self.costs:
            raise ValidationError("cost set must be nonempty")
        q = self.costs[0].dim
        for i, f in enumerate(self.costs):
            if f.dim != q:
                raise DimensionError(
                    f"cost {i + 1} has dimension {f.dim}, expected {q}"
                )

    def __len__(self):
        return len(self.costs)

    def __iter__(self):
        return iter(self.costs)

    def __getitem__(self, i):
        return self.costs[i]

    @property
    def dim(self):
        return self.costs[0].dim


@dataclass
class OptimumReport:
    theta_star: np.ndarray
    f_min: float
    gradient_residual: float


def lipschitz_max(cs: CostSet) -> float:
    """Largest gradient Lipschitz constant across the set."""
    return max(f.lipschitz_constant for f in cs)


def global_optimum(cs: CostSet) -> OptimumReport:
    """Exact minimizer of the summed cost and its value.

    For quadratics the stationarity condition is linear:
    ``theta* = (sum H_i)^-1 (-sum g_i)``.
    """
    h_sum = sum(f.H for f in cs)
    g_sum = sum(f.g for f in cs)
    theta_star = np.linalg.solve(h_sum, -g_sum)
    f_min = float(sum(f.value(theta_star) for f in cs))
    residual = float(np.linalg.norm(sum(f.gradient(theta_star) for f in cs)))
    return OptimumReport(theta_star=theta_star, f_min=f_min, gradient_residual=residual)
