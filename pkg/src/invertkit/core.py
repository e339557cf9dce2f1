"""Least-squares target functional, criticality measures, and radial weights.

For a map f and target y the functional is F(x) = 0.5 |f(x) - y|^2 with the
Euclidean norm, so F is C1 and its criticality measure reduces to the norm
of the gradient J(x)^T (f(x) - y).  All operations here are pure functions
of their inputs and safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .maps import MapUnderTest, NumericalFailure

# Jacobians up to this size go through full SVD; above it, inverse power
# iteration on J^T J.
_SVD_DIM_LIMIT = 64


@dataclass(frozen=True)
class TargetFunctional:
    """F(x) = 0.5 |f(x) - y|^2 bound to a fixed target y."""

    map: MapUnderTest
    target: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.target, dtype=float).reshape(self.map.dim)
        object.__setattr__(self, "target", y)


@dataclass
class Weight:
    """Non-decreasing weight h: [0, inf) -> [0, inf) applied as 1 + h(|x|).

    `divergence_status` records what is known about the integral of
    1/(1 + h): "proved", "falsified", or "not_falsified_up_to" a radius.
    """

    h: Callable
    kind: str  # zero | cerami | derived_from_map | custom
    divergence_status: dict = field(
        default_factory=lambda: {"status": "not_falsified_up_to", "r_max": 0.0}
    )
    grid: Optional[np.ndarray] = None  # (m, 2) table of (rho, h) for tabulated weights

    def __call__(self, rho):
        return self.h(rho)

    @staticmethod
    def zero() -> "Weight":
        return Weight(
            h=lambda rho: np.zeros_like(np.asarray(rho, dtype=float)) + 0.0,
            kind="zero",
            divergence_status={"status": "proved", "r_max": None},
        )

    @staticmethod
    def cerami() -> "Weight":
        return Weight(
            h=lambda rho: np.asarray(rho, dtype=float) + 0.0,
            kind="cerami",
            divergence_status={"status": "proved", "r_max": None},
        )

    @staticmethod
    def custom(h: Callable) -> "Weight":
        return Weight(h=h, kind="custom")

    @staticmethod
    def from_table(rho: np.ndarray, values: np.ndarray, kind: str = "derived_from_map") -> "Weight":
        rho = np.asarray(rho, dtype=float)
        values = np.asarray(values, dtype=float)
        if rho.ndim != 1 or rho.shape != values.shape:
            raise ValueError("weight table needs matching 1-d rho and h arrays")
        if np.any(np.diff(rho) <= 0):
            raise ValueError("weight table rho grid must be strictly increasing")
        grid = np.stack([rho, values], axis=1)

        def h(r):
            # piecewise linear inside the grid, constant beyond both ends
            return np.interp(np.asarray(r, dtype=float), rho, values)

        return Weight(
            h=h,
            kind=kind,
            divergence_status={"status": "not_falsified_up_to", "r_max": float(rho[-1])},
            grid=grid,
        )


def residual(F: TargetFunctional, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(F.map.dim)
    r = F.map.f_at(x) - F.target
    if not np.all(np.isfinite(r)):
        raise NumericalFailure(f"non-finite value of {F.map.name} at {x.tolist()}", x)
    return r


def value(F: TargetFunctional, x) -> float:
    """0.5 * squared Euclidean norm of f(x) - y."""
    r = residual(F, x)
    return 0.5 * float(r @ r)


def gradient(F: TargetFunctional, x) -> np.ndarray:
    """Gradient J(x)^T (f(x) - y) of the target functional."""
    x = np.asarray(x, dtype=float).reshape(F.map.dim)
    r = residual(F, x)
    J = F.map.jac_at(x)
    if not np.all(np.isfinite(J)):
        raise NumericalFailure(f"non-finite Jacobian of {F.map.name} at {x.tolist()}", x)
    return J.T @ r


def criticality(F: TargetFunctional, x) -> float:
    """Norm of the gradient of F at x (the criticality measure of a C1 functional)."""
    return float(np.linalg.norm(gradient(F, x)))


def weighted_criticality(F: TargetFunctional, w: Weight, x) -> float:
    """criticality(F, x) scaled by 1 + h(|x|)."""
    x = np.asarray(x, dtype=float).reshape(F.map.dim)
    return criticality(F, x) * (1.0 + float(w.h(float(np.linalg.norm(x)))))


def _sigma_min_power(J: np.ndarray, iters: int = 200, tol: float = 1e-13) -> float:
    """Smallest singular value by inverse power iteration on J^T J."""
    n = J.shape[0]
    try:
        lu, piv = scipy.linalg.lu_factor(J)
    except (scipy.linalg.LinAlgError, ValueError):
        return 0.0
    diag = np.abs(np.diag(lu))
    if not np.all(np.isfinite(diag)) or diag.min() == 0.0:
        return 0.0
    v = np.full(n, 1.0 / np.sqrt(n))
    sigma = 0.0
    for _ in range(iters):
        w = scipy.linalg.lu_solve((lu, piv), v, trans=1)  # J^T w = v
        u = scipy.linalg.lu_solve((lu, piv), w, trans=0)  # J u = w
        nu = float(np.linalg.norm(u))
        if not np.isfinite(nu) or nu == 0.0:
            return 0.0
        new_sigma = 1.0 / np.sqrt(nu)
        v_new = u / nu
        done = abs(new_sigma - sigma) <= tol * max(new_sigma, 1e-300)
        sigma = new_sigma
        v = v_new
        if done:
            break
    return sigma


def banach_constant(m: MapUnderTest, x) -> float:
    """Smallest singular value of the Jacobian at x.

    Equals the reciprocal operator norm of the inverse derivative when the
    Jacobian is invertible.  A singular Jacobian is not an error: the value
    0.0 itself flags that the map is not a local diffeomorphism at x.
    """
    x = np.asarray(x, dtype=float).reshape(m.dim)
    J = m.jac_at(x)
    if not np.all(np.isfinite(J)):
        raise NumericalFailure(f"non-finite Jacobian of {m.name} at {x.tolist()}", x)
    if m.dim <= _SVD_DIM_LIMIT:
        return float(np.linalg.svd(J, compute_uv=False)[-1])
    return _sigma_min_power(J)


def banach_constant_many(m: MapUnderTest, xs) -> np.ndarray:
    """Vectorized smallest singular values over a batch of points."""
    xs = np.asarray(xs, dtype=float)
    J = m.jac_many(xs)
    if m.dim <= _SVD_DIM_LIMIT:
        return np.linalg.svd(J, compute_uv=False)[..., -1]
    return np.array([_sigma_min_power(Ji) for Ji in J.reshape(-1, m.dim, m.dim)]).reshape(
        xs.shape[:-1]
    )


def norm_criticality(z) -> float:
    """Criticality measure of the Euclidean norm at z: 1 away from 0, else 0."""
    z = np.asarray(z, dtype=float)
    return 1.0 if np.any(z != 0.0) else 0.0


def lower_bound_gap(F: TargetFunctional, x) -> float:
    """criticality(F, x) minus banach_constant * |f(x) - y|.

    The smallest singular value bounds |J^T r| below by sigma_min |r|, so the
    gap is nonnegative up to floating-point roundoff for every map and target.
    """
    x = np.asarray(x, dtype=float).reshape(F.map.dim)
    r = residual(F, x)
    return criticality(F, x) - banach_constant(F.map, x) * float(np.linalg.norm(r))
