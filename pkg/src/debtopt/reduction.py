"""Debt reduction with power cost ``C x^m``: value ``k x^m`` under constant coefficients."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import (
    DiscountTooSmallError,
    DomainError,
    InvalidCandidateError,
    NotApplicableError,
)
from .model import ConcaveQuadraticGrowth, LinearGrowth, Model, PowerCost

GRID_CHECK_POINTS = 10_000


def _require_reduction(model: Model) -> PowerCost:
    if not isinstance(model.cost, PowerCost):
        raise NotApplicableError("debt reduction needs the power cost")
    if model.cost.depends_on_u:
        raise NotApplicableError("debt reduction needs a cost independent of u")
    return model.cost


def _neg_growth_plus_u(model: Model, z, u):
    return -(model.growth(z, u) + np.asarray(u, dtype=float))


def optimal_drift(model: Model) -> tuple[float, float]:
    """``(G, u*)`` with ``G = min_u -(g(u) + u)`` for a constant-coefficient model."""
    if model.rate.family != "constant" or not model.growth.is_constant:
        raise NotApplicableError("closed-form reduction needs constant coefficients")
    gr = model.growth
    z = model.z0
    u1, u2 = model.bounds.u1, model.bounds.u2
    alpha = float(gr.alpha(z))
    if isinstance(gr, LinearGrowth):
        # alpha == 1 leaves -(g+u) flat; U2 is then as good as anything
        u_star = -u1 if alpha > 1.0 else u2
    elif isinstance(gr, ConcaveQuadraticGrowth):
        beta = float(gr.beta(z))
        u_star = min(max((1.0 - alpha) / (2.0 * beta), -u1), u2)
    else:
        raise NotApplicableError(f"unsupported growth family {gr!r}")
    G = float(_neg_growth_plus_u(model, z, u_star))

    us = np.linspace(-u1, u2, GRID_CHECK_POINTS)
    grid_min = float(np.min(_neg_growth_plus_u(model, z, us)))
    if G > grid_min + 1e-12:
        raise AssertionError(f"analytic drift minimum {G} above grid minimum {grid_min}")
    return G, float(u_star)


def k_coefficient(model: Model, G: float) -> float:
    cost = _require_reduction(model)
    m = cost.m
    C = float(cost.C(model.z0))
    den = model.lam - (G + float(model.rate.r0)) * m - 0.5 * m * (m - 1) * model.sigma**2
    if not den > 0:
        raise DiscountTooSmallError(f"lambda={model.lam} too small: denominator {den:.6g} <= 0")
    return C / den


@dataclass(frozen=True)
class ReductionSolution:
    G: float
    u_star: float
    k: float
    m: float

    def to_dict(self) -> dict:
        return asdict(self)


def solve_reduction(model: Model) -> ReductionSolution:
    cost = _require_reduction(model)
    if cost.m < 2:
        raise NotApplicableError(f"the closed form is stated for m >= 2, got m={cost.m}")
    G, u_star = optimal_drift(model)
    return ReductionSolution(G=G, u_star=u_star, k=k_coefficient(model, G), m=float(cost.m))


def reduction_value(sol: ReductionSolution, x):
    """``(k x^m, m k x^(m-1), m (m-1) k x^(m-2))``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("value function is defined for x > 0")
    k, m = sol.k, sol.m
    return k * x**m, m * k * x ** (m - 1), m * (m - 1) * k * x ** (m - 2)


def hjb_residual_reduction(sol: ReductionSolution, model: Model, x):
    x = np.asarray(x, dtype=float)
    v, v1, v2 = reduction_value(sol, x)
    C = float(model.cost.C(model.z0))
    res = (
        (sol.G + float(model.rate.r0)) * x * v1
        + C * x**sol.m
        + 0.5 * model.sigma**2 * x * x * v2
        - model.lam * v
    )
    return np.abs(res)


def drift_profile(model: Model, z) -> np.ndarray:
    """``G(z) = min_u -(g(z, u) + u)`` evaluated pointwise (closed form per family)."""
    z = np.asarray(z, dtype=float)
    u1, u2 = model.bounds.u1, model.bounds.u2
    gr = model.growth
    if isinstance(gr, ConcaveQuadraticGrowth):
        u = np.clip((1.0 - gr.alpha(z)) / (2.0 * gr.beta(z)), -u1, u2)
        return _neg_growth_plus_u(model, z, u)
    return np.minimum(_neg_growth_plus_u(model, z, -u1), _neg_growth_plus_u(model, z, u2))


def ode_residual(model: Model, phi, z_grid) -> np.ndarray:
    """Residual of the factor ODE for a tabulated candidate ``phi`` at interior nodes.

    sigma_Z^2 phi''/2 + (b_Z + rho sigma sigma_Z m) phi'
        + [(G + r) m - lambda + sigma^2 m (m - 1)/2] phi + C = 0

    Central differences on a uniform grid; only a checker, no boundary-value solve.
    """
    cost = _require_reduction(model)
    z = np.asarray(z_grid, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if z.shape != phi.shape or z.size < 3:
        raise InvalidCandidateError("phi and z_grid must be equal-length arrays with >= 3 nodes")
    dz = np.diff(z)
    if not np.allclose(dz, dz[0], rtol=1e-9, atol=0):
        raise InvalidCandidateError("z_grid must be uniform")
    if np.any(phi <= 0):
        raise InvalidCandidateError("phi must be strictly positive")
    h = dz[0]
    zi = z[1:-1]
    d1 = (phi[2:] - phi[:-2]) / (2 * h)
    d2 = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / (h * h)
    m = cost.m
    sz = model.factor.vol(zi)
    coeff = (drift_profile(model, zi) + model.rate(zi)) * m - model.lam + 0.5 * model.sigma**2 * m * (m - 1)
    return (
        0.5 * sz**2 * d2
        + (model.factor.drift(zi) + model.rho * model.sigma * sz * m) * d1
        + coeff * phi[1:-1]
        + cost.C(zi)
    )
