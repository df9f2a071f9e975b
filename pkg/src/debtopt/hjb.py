"""Policy iteration for the one-dimensional (constant factor) HJB equation.

    min_u { (r - g(u) - u) x v' + f(x, u) } + sigma^2 x^2 v'' / 2 - lambda v = 0

Drift is upwinded per candidate control, diffusion uses the three-point
nonuniform second difference, so every interior row is an M-matrix row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import (
    ModelError,
    NoConvergenceError,
    NotApplicableError,
    SchemeViolationError,
    StructureMismatchError,
)
from .model import ConcaveQuadraticGrowth, LinearGrowth, Model, PowerCost, QuadraticDistanceCost, validate
from .policy import minimize_hamiltonian

BOUNDARIES = ("extrapolate", "asymptotic")


@dataclass(frozen=True)
class Grid:
    x_min: float = 0.01
    x_max: float = 8.0
    n: int = 2001
    spacing: str = "log"  # "log" | "uniform"

    def __post_init__(self):
        if not (0 < self.x_min < self.x_max):
            raise ModelError(f"grid needs 0 < x_min < x_max (got {self.x_min}, {self.x_max})")
        if self.n < 16:
            raise ModelError(f"grid needs at least 16 nodes (got {self.n})")
        if self.spacing not in ("log", "uniform"):
            raise ModelError(f"unknown spacing {self.spacing!r}")

    def nodes(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.x_min, self.x_max, self.n)
        return np.linspace(self.x_min, self.x_max, self.n)


@dataclass(frozen=True)
class HJBConfig:
    tol: float = 1e-12
    max_iter: int = 200
    boundary: str = "extrapolate"


@dataclass
class GridValue:
    x: np.ndarray
    v: np.ndarray
    u: np.ndarray
    iterations: int
    residual: float
    monotone: bool = True
    max_increase: float = 0.0
    history: list = field(default_factory=list, repr=False)

    def rows(self):
        return list(zip(self.x.tolist(), self.v.tolist(), self.u.tolist()))


def _problem(model: Model) -> str:
    if isinstance(model.cost, QuadraticDistanceCost):
        return "smoothing"
    if isinstance(model.cost, PowerCost):
        return "reduction"
    raise NotApplicableError(f"no boundary data for cost {model.cost!r}")


def left_boundary_value(model: Model) -> float:
    if _problem(model) == "smoothing":
        return model.cost.xbar**2 / model.lam
    return 0.0


class _Operator:
    """Discrete generator pieces on a fixed grid."""

    def __init__(self, model: Model, x: np.ndarray):
        self.model = model
        self.x = x
        self.xi = x[1:-1]
        self.hm = x[1:-1] - x[:-2]
        self.hp = x[2:] - x[1:-1]
        self.diff = model.sigma**2 * self.xi**2 / (self.hp + self.hm)
        self.z = np.full_like(self.xi, model.z0)

    def drift(self, u):
        return self.model.drift_rate(self.z, u) * self.xi

    def coefficients(self, u):
        m = self.drift(u)
        lo = self.diff / self.hm + np.maximum(-m, 0.0) / self.hm
        hi = self.diff / self.hp + np.maximum(m, 0.0) / self.hp
        return lo, hi

    def one_sided(self, v):
        dp = (v[2:] - v[1:-1]) / self.hp
        dm = (v[1:-1] - v[:-2]) / self.hm
        return dp, dm

    def second(self, v):
        dp, dm = self.one_sided(v)
        return 2.0 * (dp - dm) / (self.hp + self.hm)

    def discrete_h(self, v, u):
        """Upwinded u-dependent part: drift term plus running cost."""
        dp, dm = self.one_sided(v)
        m = self.drift(u)
        return np.maximum(m, 0.0) * dp + np.minimum(m, 0.0) * dm + self.model.f(self.xi, self.z, u)

    def candidates(self, v):
        """Controls among which the upwinded Hamiltonian attains its minimum."""
        model = self.model
        u1, u2 = model.bounds.u1, model.bounds.u2
        dp, dm = self.one_sided(v)
        cands = [
            np.full_like(self.xi, -u1),
            np.full_like(self.xi, u2),
            np.asarray(minimize_hamiltonian(model, dp, self.xi, self.z).u, dtype=float),
            np.asarray(minimize_hamiltonian(model, dm, self.xi, self.z).u, dtype=float),
        ]
        for root in _zero_drift_controls(model):
            cands.append(np.full_like(self.xi, min(max(root, -u1), u2)))
        return np.stack(cands)

    def greedy(self, v, current=None):
        cands = self.candidates(v)
        h = np.stack([self.discrete_h(v, c) for c in cands])
        k = np.argmin(h, axis=0)
        cols = np.arange(self.xi.size)
        best_u = cands[k, cols]
        best_h = h[k, cols]
        if current is not None:
            h_cur = self.discrete_h(v, current)
            keep = h_cur <= best_h + 1e-14 * (1.0 + np.abs(best_h))
            best_u = np.where(keep, current, best_u)
            best_h = np.where(keep, h_cur, best_h)
        return best_u, best_h


def _zero_drift_controls(model: Model) -> list[float]:
    """Controls at which ``r - g(u) - u`` vanishes (where the upwind direction flips)."""
    gr = model.growth
    z = model.z0
    r = float(model.rate(z))
    g0 = float(gr.g0(z))
    alpha = float(gr.alpha(z))
    if isinstance(gr, LinearGrowth):
        if alpha == 1.0:
            return []
        return [(g0 - r) / (alpha - 1.0)]
    if isinstance(gr, ConcaveQuadraticGrowth):
        beta = float(gr.beta(z))
        # beta u^2 + (alpha - 1) u + (r - g0) = 0
        roots = np.roots([beta, alpha - 1.0, r - g0])
        return [float(q.real) for q in roots if abs(q.imag) < 1e-14]
    return []


def _asymptote(model: Model):
    """Far-field closed form used by the ``asymptotic`` boundary option."""
    if _problem(model) == "smoothing":
        from .smoothing import drift_extremes, quadratic_coeffs

        G1, G2 = drift_extremes(model)
        return ("curvature", 2.0 * quadratic_coeffs(model, G1, G2).a1)
    from .reduction import solve_reduction

    sol = solve_reduction(model)
    return ("value", lambda x: sol.k * x**sol.m)


def _assemble(op: _Operator, u, boundary: str, model: Model):
    x = op.x
    n = x.size
    lo, hi = op.coefficients(u)
    if np.any(lo < 0) or np.any(hi < 0):
        raise SchemeViolationError("negative off-diagonal weight after upwinding")
    ab = np.zeros((5, n))  # (l, u) = (3, 1): ab[1 + i - j, j] = A[i, j]
    rhs = np.empty(n)
    idx = np.arange(1, n - 1)
    ab[1, idx] = model.lam + lo + hi
    ab[2, idx - 1] = -lo
    ab[0, idx + 1] = -hi
    rhs[1:-1] = model.f(op.xi, op.z, u)

    ab[1, 0] = 1.0
    rhs[0] = left_boundary_value(model)

    h1 = x[-1] - x[-2]
    h2 = x[-2] - x[-3]
    c_last = 2.0 / (h1 + h2)
    if boundary == "extrapolate":
        # second difference over the last three nodes equals the one before it
        h3 = x[-3] - x[-4]
        c_prev = 2.0 / (h2 + h3)
        row = {
            n - 1: c_last / h1,
            n - 2: -c_last / h1 - c_last / h2 - c_prev / h2,
            n - 3: c_last / h2 + c_prev / h2 + c_prev / h3,
            n - 4: -c_prev / h3,
        }
        for j, a in row.items():
            ab[1 + (n - 1) - j, j] = a
        rhs[-1] = 0.0
    elif boundary == "asymptotic":
        kind, target = _asymptote(model)
        if kind == "curvature":
            ab[1, n - 1] = c_last / h1
            ab[2, n - 2] = -c_last / h1 - c_last / h2
            ab[3, n - 3] = c_last / h2
            rhs[-1] = target
        else:
            ab[1, n - 1] = 1.0
            rhs[-1] = target(x[-1])
    else:
        raise ModelError(f"unknown boundary option {boundary!r}")
    return ab, rhs


def policy_iteration(model: Model, grid: Grid | None = None, cfg: HJBConfig | None = None) -> GridValue:
    grid = grid or Grid()
    cfg = cfg or HJBConfig()
    validate(model)
    if not model.is_constant_coefficient:
        raise NotApplicableError("the grid solver handles constant-coefficient models only")
    if cfg.boundary not in BOUNDARIES:
        raise ModelError(f"unknown boundary option {cfg.boundary!r}")
    x = grid.nodes()
    op = _Operator(model, x)

    v = model.f(x, model.z0, 0.0) / model.lam
    u, _ = op.greedy(v)
    history = []
    monotone = True
    max_inc = 0.0
    for it in range(1, cfg.max_iter + 1):
        ab, rhs = _assemble(op, u, cfg.boundary, model)
        v_new = solve_banded((3, 1), ab, rhs)
        if history:
            inc = float(np.max(v_new - history[-1]))
            max_inc = max(max_inc, inc)
            if inc > 1e-12 * (1.0 + float(np.max(np.abs(history[-1])))):
                monotone = False
        history.append(v_new)
        u_new, _ = op.greedy(v_new, current=u)
        dv = float(np.max(np.abs(v_new - v)))
        du = float(np.max(np.abs(u_new - u)))
        v = v_new
        if du == 0.0 or dv < cfg.tol:
            u_full = np.concatenate([[u_new[0]], u_new, [u_new[-1]]])
            res = _discrete_residual(op, v)
            return GridValue(x, v, u_full, it, res, monotone, max_inc, history)
        u = u_new
    raise NoConvergenceError(
        f"policy iteration did not converge in {cfg.max_iter} iterations", _discrete_residual(op, v)
    )


def _discrete_residual(op: _Operator, v) -> float:
    _, h = op.greedy(v)
    res = h + 0.5 * op.model.sigma**2 * op.xi**2 * op.second(v) - op.model.lam * v[1:-1]
    return float(np.max(np.abs(res)))


def residual_norm(value, model: Model, grid: Grid | None = None) -> float:
    """Sup over interior nodes of the HJB residual.

    ``value`` may be a GridValue, an array of node values on ``grid`` (discrete
    operator), or a callable ``x -> (v, v', v'')`` (analytic derivatives).
    """
    if isinstance(value, GridValue):
        return _discrete_residual(_Operator(model, value.x), value.v)
    grid = grid or Grid()
    x = grid.nodes()
    if callable(value):
        xi = x[1:-1]
        v, v1, v2 = (np.asarray(a, dtype=float) for a in value(xi))
        z = np.full_like(xi, model.z0)
        mn = minimize_hamiltonian(model, v1, xi, z)
        u = np.asarray(mn.u, dtype=float)
        drift_part = model.drift_rate(z, u) * xi * v1 + model.f(xi, z, u)
        res = drift_part + 0.5 * model.sigma**2 * xi**2 * v2 - model.lam * v
        return float(np.max(np.abs(res)))
    return _discrete_residual(_Operator(model, x), np.asarray(value, dtype=float))


def extract_threshold(gv: GridValue, max_transition: int = 2) -> float:
    """Location of the single switch of a bang-bang grid policy.

    Nodes strictly between the two extreme controls (typically the zero-drift
    control where the one-sided slopes disagree in sign) are treated as a
    transition layer of at most ``max_transition`` nodes; the threshold is the
    midpoint of the gap between the last node of one regime and the first of
    the other.
    """
    u = gv.u[1:-1]
    x = gv.x[1:-1]
    lo, hi = float(u.min()), float(u.max())
    bang = (u == lo) | (u == hi)
    xb, ub = x[bang], u[bang]
    switches = np.flatnonzero(np.diff(ub) != 0)
    if switches.size != 1:
        raise StructureMismatchError(
            f"expected one policy switch, found {switches.size}", n_switches=int(switches.size)
        )
    i = int(switches[0])
    left, right = xb[i], xb[i + 1]
    inner = np.count_nonzero((x > left) & (x < right))
    if inner > max_transition or np.count_nonzero(~bang) > inner:
        raise StructureMismatchError("policy is not bang-bang away from the switch", n_switches=1)
    return 0.5 * (left + right)


def local_spacing(gv: GridValue, x: float) -> float:
    i = int(np.clip(np.searchsorted(gv.x, x), 1, gv.x.size - 1))
    return float(gv.x[i] - gv.x[i - 1])
