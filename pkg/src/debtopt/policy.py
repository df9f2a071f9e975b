"""Hamiltonian minimization and fiscal policy rules.

The u-dependent part of the HJB operator is

    H(x, z, u) = -x (g(z, u) + u) v_x(x, z) + f(x, z, u)

and the optimal feedback is its pointwise minimizer over ``[-U1, U2]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import (
    ControlViolationError,
    DegenerateError,
    DomainError,
    NonConvexHamiltonianError,
    NotApplicableError,
)
from .model import ConcaveQuadraticGrowth, ControlBounds, LinearGrowth, Model

BISECTION_TOL = 1e-10
CURVATURE_PROBES = 33
GRID_SEARCH_POINTS = 10_000

# regime tags
LINEAR_ENDPOINT = "linear-endpoint"
INTERIOR_MATCHING = "interior-matching"
CONVEX_BISECTION = "convex-bisection"
CONCAVE_ENDPOINT = "concave-endpoint"
GRID_SEARCH = "grid-search"


@dataclass(frozen=True)
class ValueGradient:
    fn: Callable
    provenance: str = "closed-form"  # or "grid-interpolated"

    def __call__(self, x, z):
        return np.asarray(self.fn(x, z), dtype=float)


def _grad_values(v_x, x, z):
    if callable(v_x):
        return np.broadcast_to(np.asarray(v_x(x, z), dtype=float), np.broadcast(x, z).shape)
    return np.broadcast_to(np.asarray(v_x, dtype=float), np.broadcast(x, z).shape)


# ------------------------------------------------------------------ policies


@dataclass(frozen=True)
class ConstantPolicy:
    u: float

    def __call__(self, x, z=0.0):
        return np.full(np.broadcast(np.asarray(x), np.asarray(z)).shape, float(self.u))

    def check(self, bounds: ControlBounds) -> None:
        _check_values([self.u], bounds, "constant policy")

    def to_dict(self) -> dict:
        return {"kind": "constant", "u": self.u}


@dataclass(frozen=True)
class ThresholdBangBang:
    """``above`` for ``x >= threshold``, ``below`` otherwise."""

    threshold: float
    below: float
    above: float

    def __call__(self, x, z=0.0):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= self.threshold, self.above, self.below)
        return np.broadcast_to(out, np.broadcast(x, np.asarray(z)).shape).copy()

    def check(self, bounds: ControlBounds) -> None:
        _check_values([self.below, self.above], bounds, "threshold policy")

    def to_dict(self) -> dict:
        return {"kind": "threshold", "threshold": self.threshold, "below": self.below, "above": self.above}


@dataclass(frozen=True)
class ZFeedback:
    """u*(z) tabulated on an increasing z-grid, linearly interpolated and held flat outside."""

    z_grid: tuple
    values: tuple

    def __call__(self, x, z=0.0):
        z = np.asarray(z, dtype=float)
        shape = np.broadcast(np.asarray(x), z).shape
        if len(self.z_grid) == 1:
            return np.full(shape, float(self.values[0]))
        return np.broadcast_to(np.interp(z, self.z_grid, self.values), shape).copy()

    def check(self, bounds: ControlBounds) -> None:
        _check_values(self.values, bounds, "z-feedback policy")

    def to_dict(self) -> dict:
        return {"kind": "z_feedback", "z_grid": list(self.z_grid), "values": list(self.values)}


@dataclass(frozen=True)
class StateFeedback:
    """u*(x, z) on a tensor grid; lookup snaps to the nearest node."""

    x_grid: tuple
    z_grid: tuple
    table: tuple  # rows indexed by x, columns by z

    def __call__(self, x, z=0.0):
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        tab = np.asarray(self.table, dtype=float).reshape(len(self.x_grid), len(self.z_grid))
        return tab[_nearest(self.x_grid, x), _nearest(self.z_grid, z)]

    def check(self, bounds: ControlBounds) -> None:
        _check_values(np.ravel(self.table), bounds, "state-feedback policy")

    def to_dict(self) -> dict:
        return {
            "kind": "state_feedback",
            "x_grid": list(self.x_grid),
            "z_grid": list(self.z_grid),
            "table": [list(row) for row in self.table],
        }


PolicyRule = Union[ConstantPolicy, ThresholdBangBang, ZFeedback, StateFeedback]


def _nearest(grid, q):
    grid = np.asarray(grid, dtype=float)
    if grid.size == 1:
        return np.zeros(np.shape(q), dtype=int)
    i = np.clip(np.searchsorted(grid, q), 1, grid.size - 1)
    left = grid[i - 1]
    right = grid[i]
    return np.where(q - left <= right - q, i - 1, i)


def _check_values(values, bounds, what):
    vals = np.asarray(values, dtype=float)
    if not np.all(bounds.contains(vals)):
        raise ControlViolationError(
            f"{what} emits values outside [-{bounds.u1}, {bounds.u2}]: "
            f"min={vals.min()}, max={vals.max()}"
        )


# --------------------------------------------------------------- Hamiltonian


def hamiltonian(model: Model, v_x, x, z, u):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("Hamiltonian needs x > 0")
    vx = _grad_values(v_x, x, z)
    g = model.growth(z, u)
    return -x * (g + u) * vx + model.f(x, z, u)


def dH_du(model: Model, v_x, x, z, u):
    vx = _grad_values(v_x, x, z)
    return model.cost.du(x, z, u) - np.asarray(x) * vx * (model.growth.du(z, u) + 1.0)


def d2H_du2(model: Model, v_x, x, z, u):
    vx = _grad_values(v_x, x, z)
    return model.cost.duu(x, z, u) - np.asarray(x) * vx * model.growth.duu(z, u)


@dataclass(frozen=True)
class Minimizer:
    u: object
    regime: object


def minimize_hamiltonian(model: Model, v_x, x, z=0.0, grid_fallback: bool = False) -> Minimizer:
    """Pointwise argmin of H over the control interval (vectorized over x, z).

    Linear growth with u-free cost gives the bang-bang endpoint rule, with the
    tie ``v_x (alpha - 1) == 0`` sent to ``-U1``.  Strictly convex H is handled by
    the closed-form interior candidate (u-free cost) or bisection on dH/du.
    Concave or affine H is minimized by comparing the endpoints.
    """
    scalar = np.ndim(x) == 0 and np.ndim(z) == 0
    x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
    if np.any(x <= 0):
        raise DomainError("Hamiltonian needs x > 0")
    vx = np.array(_grad_values(v_x, x, z), dtype=float)
    u1, u2 = model.bounds.u1, model.bounds.u2
    gr = model.growth
    cost = model.cost
    u = np.empty(x.shape)
    regime = np.empty(x.shape, dtype=object)

    if isinstance(gr, LinearGrowth) and not cost.depends_on_u:
        alpha = gr.alpha(z)
        u[...] = np.where(vx * (alpha - 1.0) >= 0, -u1, u2)
        regime[...] = LINEAR_ENDPOINT
        return _pack(u, regime, scalar)

    probes = np.linspace(-u1, u2, CURVATURE_PROBES)
    curv = d2H_du2(model, vx[..., None], x[..., None], z[..., None], probes)
    convex = np.all(curv > 0, axis=-1)
    flat_or_concave = np.all(curv <= 0, axis=-1)
    mixed = ~(convex | flat_or_concave)
    if np.any(mixed):
        if not grid_fallback:
            raise NonConvexHamiltonianError(
                "d2H/du2 changes sign on the control interval; pass grid_fallback=True"
            )
        u[mixed] = _grid_argmin(model, vx[mixed], x[mixed], z[mixed])
        regime[mixed] = GRID_SEARCH

    if np.any(flat_or_concave):
        m = flat_or_concave
        h_lo = hamiltonian(model, vx[m], x[m], z[m], -u1)
        h_hi = hamiltonian(model, vx[m], x[m], z[m], u2)
        u[m] = np.where(h_lo <= h_hi, -u1, u2)
        regime[m] = CONCAVE_ENDPOINT

    if np.any(convex):
        m = convex
        xm, zm, vm = x[m], z[m], vx[m]
        if isinstance(gr, ConcaveQuadraticGrowth) and not cost.depends_on_u:
            uhat = (1.0 - gr.alpha(zm)) / (2.0 * gr.beta(zm))
            lo_branch = vm * (gr.du(zm, -u1) + 1.0) <= 0
            hi_branch = vm * (gr.du(zm, u2) + 1.0) >= 0
            u[m] = np.where(lo_branch, -u1, np.where(hi_branch, u2, uhat))
            regime[m] = INTERIOR_MATCHING
        else:
            u[m] = _bisect_dH(model, vm, xm, zm)
            regime[m] = CONVEX_BISECTION
    return _pack(u, regime, scalar)


def _pack(u, regime, scalar):
    if scalar:
        return Minimizer(float(u.reshape(-1)[0]), str(regime.reshape(-1)[0]))
    return Minimizer(u, regime)


def _bisect_dH(model, vx, x, z):
    u1, u2 = model.bounds.u1, model.bounds.u2
    lo = np.full(x.shape, -u1)
    hi = np.full(x.shape, u2)
    d_lo = dH_du(model, vx, x, z, lo)
    d_hi = dH_du(model, vx, x, z, hi)
    out = np.empty(x.shape)
    at_lo = d_lo >= 0
    at_hi = (d_hi <= 0) & ~at_lo
    inner = ~(at_lo | at_hi)
    out[at_lo] = -u1
    out[at_hi] = u2
    if np.any(inner):
        a, b = lo[inner], hi[inner]
        xi, zi, vi = x[inner], z[inner], vx[inner]
        scale = 1e-8 * (1.0 + np.abs(xi * vi))
        for _ in range(200):
            mid = 0.5 * (a + b)
            d = dH_du(model, vi, xi, zi, mid)
            a = np.where(d < 0, mid, a)
            b = np.where(d < 0, b, mid)
            mid = 0.5 * (a + b)
            if np.all(b - a < BISECTION_TOL) and np.all(
                np.abs(dH_du(model, vi, xi, zi, mid)) < scale
            ):
                break
        out[inner] = 0.5 * (a + b)
    return out


def _grid_argmin(model, vx, x, z):
    us = np.linspace(-model.bounds.u1, model.bounds.u2, GRID_SEARCH_POINTS)
    h = hamiltonian(model, vx[..., None], x[..., None], z[..., None], us)
    return us[np.argmin(h, axis=-1)]


def grid_search_argmin(model: Model, v_x, x, z=0.0, n: int = GRID_SEARCH_POINTS):
    """Brute-force argmin of H on ``n`` equally spaced controls (oracle for tests)."""
    us = np.linspace(-model.bounds.u1, model.bounds.u2, n)
    h = hamiltonian(model, v_x, np.full(n, float(x)), np.full(n, float(z)), us)
    k = int(np.argmin(h))
    return float(us[k]), float(h[k])


# --------------------------------------------------------- interior candidate


@dataclass(frozen=True)
class InteriorCandidate:
    u: float | None
    endpoint: float | None  # dominating endpoint when the root leaves the interval


def interior_candidate(model: Model, z: float = 0.0) -> InteriorCandidate:
    """Root of ``g_u(z, u) = -1``, i.e. ``(1 - alpha) / (2 beta)`` for the quadratic family."""
    gr = model.growth
    if not isinstance(gr, ConcaveQuadraticGrowth):
        raise NotApplicableError("interior candidate needs growth strictly concave in u")
    uhat = float((1.0 - gr.alpha(z)) / (2.0 * gr.beta(z)))
    if uhat > model.bounds.u2:
        return InteriorCandidate(None, model.bounds.u2)
    if uhat < -model.bounds.u1:
        return InteriorCandidate(None, -model.bounds.u1)
    return InteriorCandidate(uhat, None)


def reduction_policy_z(model: Model, *, gradient_positive: bool = True, z_grid=None) -> ZFeedback:
    """Three-branch u*(z) for a u-free cost increasing in x.

    ``gradient_positive`` is the caller's assertion that ``v_x > 0`` everywhere;
    it cannot be checked without the value function.
    """
    if not gradient_positive:
        raise NotApplicableError("the z-feedback rule is derived under v_x > 0")
    if model.cost.depends_on_u:
        raise NotApplicableError("the z-feedback rule needs a cost independent of u")
    gr = model.growth
    zs = np.asarray(model.z_lattice if z_grid is None else z_grid, dtype=float)
    u1, u2 = model.bounds.u1, model.bounds.u2
    if isinstance(gr, LinearGrowth):
        alpha = gr.alpha(zs)
        if np.any(alpha == 1.0):
            raise DegenerateError("alpha(z) == 1 on the evaluation range")
        vals = np.where(alpha > 1.0, -u1, u2)
    elif isinstance(gr, ConcaveQuadraticGrowth):
        uhat = (1.0 - gr.alpha(zs)) / (2.0 * gr.beta(zs))
        vals = np.where(
            gr.du(zs, -u1) < -1.0, -u1, np.where(gr.du(zs, u2) > -1.0, u2, uhat)
        )
    else:
        raise NotApplicableError("growth family is not concave in u")
    return ZFeedback(tuple(float(v) for v in zs), tuple(float(v) for v in vals))


def policy_from_dict(doc: dict) -> PolicyRule:
    kind = doc.get("kind")
    if kind == "constant":
        return ConstantPolicy(float(doc["u"]))
    if kind == "threshold":
        return ThresholdBangBang(float(doc["threshold"]), float(doc["below"]), float(doc["above"]))
    if kind == "z_feedback":
        return ZFeedback(tuple(map(float, doc["z_grid"])), tuple(map(float, doc["values"])))
    if kind == "state_feedback":
        return StateFeedback(
            tuple(map(float, doc["x_grid"])),
            tuple(map(float, doc["z_grid"])),
            tuple(tuple(map(float, row)) for row in doc["table"]),
        )
    raise ValueError(f"unknown policy kind {kind!r}")
