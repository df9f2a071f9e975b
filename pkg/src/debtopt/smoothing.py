"""Closed-form debt smoothing: quadratic distance cost, constant coefficients.

The value function is piecewise

    w(x) = a1 x^2 + b1 x + c1 + d1 x^gamma1     for x >= x_tilde   (drift G1 + r)
    w(x) = a2 x^2 + b2 x + c2 + d2 x^gamma2     for x <  x_tilde   (drift G2 + r)

with gamma_i roots of ``(sigma^2/2) g (g - 1) + (G_i + r) g - lambda = 0`` and
``(d1, d2, x_tilde)`` fixed by C^2 pasting and ``w'(x_tilde) = 0``.

Two constructions are available:

``"pasting"`` (default)
    gamma_i are the true characteristic roots and ``d1, d2`` come from the
    slope and curvature conditions.  The result solves the HJB equation.
``"printed"``
    Reproduces the commonly quoted closed-form expressions literally: the root
    formula with ``4 lambda sigma^2`` under the square root and
    ``x_tilde^(gamma2 - 3)`` in the d2 denominator.  These recover the published
    threshold table but do not paste smoothly nor satisfy the characteristic
    equation; the variant is kept for reproduction and comparison only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import (
    AmbiguousThresholdError,
    DegenerateError,
    DiscountTooSmallError,
    DomainError,
    NonConvexSolutionError,
    NoThresholdError,
    NotApplicableError,
)
from .model import ConcaveQuadraticGrowth, LinearGrowth, Model, QuadraticDistanceCost
from .policy import ThresholdBangBang

log = logging.getLogger(__name__)

VARIANTS = ("pasting", "printed")
SCAN_INTERVALS = 512
ROOT_FTOL = 1e-12
ROOT_XTOL = 1e-10
CONVEXITY_RANGE = (0.05, 5.0)


def _constant_parts(model: Model) -> tuple[float, float, float]:
    if model.rate.family != "constant" or not model.growth.is_constant:
        raise NotApplicableError("closed-form smoothing needs constant coefficients")
    z = model.z0
    gr = model.growth
    alpha = float(gr.alpha(z))
    beta = float(gr.beta(z)) if isinstance(gr, ConcaveQuadraticGrowth) else 0.0
    return float(gr.g0(z)), alpha, beta


def drift_controls(model: Model) -> tuple[float, float]:
    """Controls attaining ``G1 = min -(g+u)`` and ``G2 = max -(g+u)``."""
    g0, alpha, beta = _constant_parts(model)
    u1, u2 = model.bounds.u1, model.bounds.u2
    # -(g(u) + u) = -g0 + (alpha - 1) u + beta u^2, convex in u
    h = lambda u: -g0 + (alpha - 1.0) * u + beta * u * u  # noqa: E731
    if beta > 0:
        u_min = min(max((1.0 - alpha) / (2.0 * beta), -u1), u2)
    else:
        u_min = u2 if alpha < 1.0 else -u1
    u_max = -u1 if h(-u1) >= h(u2) else u2
    return u_min, u_max


def drift_extremes(model: Model) -> tuple[float, float]:
    g0, alpha, beta = _constant_parts(model)
    u_min, u_max = drift_controls(model)
    h = lambda u: -g0 + (alpha - 1.0) * u + beta * u * u  # noqa: E731
    return h(u_min), h(u_max)


@dataclass(frozen=True)
class QuadraticCoeffs:
    a1: float
    a2: float
    b1: float
    b2: float
    c1: float
    c2: float


def quadratic_coeffs(model: Model, G1: float, G2: float) -> QuadraticCoeffs:
    xbar = _xbar(model)
    r, lam, s2 = float(model.rate.r0), model.lam, model.sigma**2
    a, b = [], []
    for G in (G1, G2):
        den_a = lam - 2.0 * (G + r) - s2
        den_b = lam - (G + r)
        if not (den_a > 0 and den_b > 0):
            raise DiscountTooSmallError(
                f"lambda={lam} too small for drift G={G}: need lambda > 2(G+r)+sigma^2 = {lam - den_a:.6g}"
            )
        a.append(1.0 / den_a)
        b.append(-2.0 * xbar / den_b)
    c = xbar**2 / lam
    return QuadraticCoeffs(a[0], a[1], b[0], b[1], c, c)


def _xbar(model: Model) -> float:
    if not isinstance(model.cost, QuadraticDistanceCost):
        raise NotApplicableError("smoothing needs the quadratic distance cost")
    return float(model.cost.xbar)


def _root(model: Model, G: float, sign: int, variant: str) -> float:
    s2 = model.sigma**2
    if s2 == 0:
        raise DegenerateError("sigma == 0: the power solutions degenerate")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    B = 2.0 * (G + float(model.rate.r0)) - s2
    k = 8.0 if variant == "pasting" else 4.0
    return (-B + sign * math.sqrt(B * B + k * model.lam * s2)) / (2.0 * s2)


def gamma_roots(model: Model, G1: float, G2: float, variant: str = "pasting") -> tuple[float, float]:
    """Negative root for the upper branch (drift G1), positive root for the lower (G2)."""
    return _root(model, G1, -1, variant), _root(model, G2, +1, variant)


def characteristic(model: Model, G: float, gamma: float) -> float:
    return 0.5 * model.sigma**2 * gamma * (gamma - 1.0) + (G + float(model.rate.r0)) * gamma - model.lam


class _Pieces:
    """Everything except the threshold; evaluates d(x~) and the matching gap F(x~)."""

    def __init__(self, model: Model, variant: str):
        self.model = model
        self.variant = variant
        self.G1, self.G2 = drift_extremes(model)
        self.q = quadratic_coeffs(model, self.G1, self.G2)
        self.g1, self.g2 = gamma_roots(model, self.G1, self.G2, variant)
        if self.g2 in (0.0, 1.0):
            raise DegenerateError(f"gamma2={self.g2} makes the curvature condition singular")
        if self.g1 == 0.0:
            raise DegenerateError("gamma1 == 0")

    def power_terms(self, xt):
        """(d1 xt^g1, d2 xt^g2): the power-term values at the threshold."""
        q, g1, g2 = self.q, self.g1, self.g2
        xt = np.asarray(xt, dtype=float)
        slope1 = 2.0 * q.a1 * xt + q.b1
        if self.variant == "printed":
            e1 = -slope1 * xt / g1
            num = 2.0 * (q.a1 - q.a2) * xt - (g1 - 1.0) * slope1
            e2 = num * xt**3 / (g2 * (g2 - 1.0))
            return e1, e2
        # upper slope zero and curvature continuity, in the scaled unknowns e_i = d_i xt^g_i
        e1 = -slope1 * xt / g1
        e2 = (g1 * (g1 - 1.0) * e1 + (2.0 * q.a1 - 2.0 * q.a2) * xt**2) / (g2 * (g2 - 1.0))
        return e1, e2

    def linear_system(self, xt: float) -> tuple[float, float]:
        """Solve the slope/curvature conditions as a 2x2 system for (d1 xt^g1, d2 xt^g2)."""
        q, g1, g2 = self.q, self.g1, self.g2
        A = np.array(
            [[g1 / xt, 0.0], [g1 * (g1 - 1.0) / xt**2, -g2 * (g2 - 1.0) / xt**2]]
        )
        rhs = np.array([-(2.0 * q.a1 * xt + q.b1), 2.0 * q.a2 - 2.0 * q.a1])
        e1, e2 = np.linalg.solve(A, rhs)
        return float(e1), float(e2)

    def gap(self, xt):
        q = self.q
        e1, e2 = self.power_terms(xt)
        return (q.a1 * xt**2 + q.b1 * xt + e1) - (q.a2 * xt**2 + q.b2 * xt + e2)


def d_coefficients(model: Model, threshold: float, variant: str = "pasting") -> tuple[float, float]:
    if not threshold > 0:
        raise DomainError("threshold must be positive")
    pieces = _Pieces(model, variant)
    return _d_from_pieces(pieces, threshold)


def _d_from_pieces(pieces: _Pieces, xt: float) -> tuple[float, float]:
    if pieces.variant == "printed":
        e1, e2 = (float(v) for v in pieces.power_terms(xt))
    else:
        e1, e2 = pieces.linear_system(xt)
        c1, c2 = (float(v) for v in pieces.power_terms(xt))
        if not (math.isclose(e1, c1, rel_tol=1e-9, abs_tol=1e-15)
                and math.isclose(e2, c2, rel_tol=1e-9, abs_tol=1e-15)):
            raise AssertionError("closed-form d coefficients disagree with the 2x2 solve")
        printed = _Pieces.power_terms(_as_printed(pieces), xt)
        if not math.isclose(e2, float(printed[1]), rel_tol=1e-6):
            log.info(
                "d2 from the pasting system (%.12g) differs from the printed formula (%.12g) at x~=%.6g",
                e2 * xt ** -pieces.g2, float(printed[1]) * xt ** -pieces.g2, xt,
            )
    return e1 * xt ** -pieces.g1, e2 * xt ** -pieces.g2


def _as_printed(pieces: _Pieces) -> _Pieces:
    # same gammas, printed d-formula: isolates the exponent discrepancy
    clone = object.__new__(_Pieces)
    clone.__dict__.update(pieces.__dict__)
    clone.variant = "printed"
    return clone


def _bisect(fn, a: float, b: float, fa: float) -> float:
    for _ in range(400):
        m = 0.5 * (a + b)
        fm = float(fn(m))
        if fm == 0.0:
            return m
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
        if b - a < ROOT_XTOL and abs(float(fn(0.5 * (a + b)))) < ROOT_FTOL:
            break
        if b - a <= 4 * np.finfo(float).eps * max(abs(a), abs(b)):
            break
    return 0.5 * (a + b)


def threshold_roots(model: Model, variant: str = "pasting") -> list[float]:
    """All sign changes of the value-matching gap on [xbar/10, 10 xbar]."""
    pieces = _Pieces(model, variant)
    return _scan(pieces)


def _scan(pieces: _Pieces) -> list[float]:
    xbar = pieces.model.cost.xbar
    xs = np.linspace(xbar / 10.0, 10.0 * xbar, SCAN_INTERVALS + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        fs = pieces.gap(xs)
    roots = []
    for i in range(SCAN_INTERVALS):
        fa, fb = fs[i], fs[i + 1]
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if fa == 0.0:
            roots.append(float(xs[i]))
        elif (fa < 0) != (fb < 0) and fb != 0.0:
            roots.append(_bisect(pieces.gap, float(xs[i]), float(xs[i + 1]), float(fa)))
    if fs[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


def solve_threshold(model: Model, variant: str = "pasting", root: str = "unique") -> float:
    """Switching threshold from value matching.

    ``root="unique"`` raises on zero or several sign changes; ``"nearest_target"``
    picks the root closest to ``xbar``.
    """
    pieces = _Pieces(model, variant)
    return _pick_root(pieces, root)


def _pick_root(pieces: _Pieces, root: str) -> float:
    xbar = pieces.model.cost.xbar
    roots = _scan(pieces)
    if not roots:
        xs = np.linspace(xbar / 10.0, 10.0 * xbar, 9)
        profile = list(zip(xs.tolist(), np.asarray(pieces.gap(xs)).tolist()))
        raise NoThresholdError("value-matching gap has no sign change", profile)
    if len(roots) > 1:
        if root == "nearest_target":
            return min(roots, key=lambda x: abs(x - xbar))
        raise AmbiguousThresholdError(f"value-matching gap changes sign {len(roots)} times", roots)
    return roots[0]


@dataclass(frozen=True)
class SmoothingSolution:
    G1: float
    G2: float
    a1: float
    a2: float
    b1: float
    b2: float
    c1: float
    c2: float
    gamma1: float
    gamma2: float
    d1: float
    d2: float
    threshold: float
    u_above: float  # control attaining G1
    u_below: float  # control attaining G2
    alpha_below_one: bool
    variant: str = "pasting"

    def to_dict(self) -> dict:
        return asdict(self)


def solve_smoothing(
    model: Model, variant: str = "pasting", root: str = "unique", check_convexity: bool = True
) -> SmoothingSolution:
    pieces = _Pieces(model, variant)
    xbar = _xbar(model)
    u_above, u_below = drift_controls(model)
    _, alpha, _ = _constant_parts(model)
    q = pieces.q
    if xbar == 0.0:
        # f = x^2: no switching, w = a1 x^2 on (0, inf)
        xt, d1, d2 = 0.0, 0.0, 0.0
    else:
        xt = _pick_root(pieces, root)
        d1, d2 = _d_from_pieces(pieces, xt)
    sol = SmoothingSolution(
        G1=pieces.G1, G2=pieces.G2,
        a1=q.a1, a2=q.a2, b1=q.b1, b2=q.b2, c1=q.c1, c2=q.c2,
        gamma1=pieces.g1, gamma2=pieces.g2, d1=d1, d2=d2, threshold=xt,
        u_above=u_above, u_below=u_below, alpha_below_one=alpha < 1.0, variant=variant,
    )
    if check_convexity:
        xs = np.geomspace(*CONVEXITY_RANGE, 2001)
        w2 = value(sol, xs)[2]
        if not np.all(w2 > 0):
            bad = xs[np.argmin(w2)]
            raise NonConvexSolutionError(f"w'' <= 0 near x={bad:.6g}; verification does not apply")
    return sol


def _branch(sol: SmoothingSolution, x, upper: bool):
    x = np.asarray(x, dtype=float)
    if upper:
        a, b, c, d, g = sol.a1, sol.b1, sol.c1, sol.d1, sol.gamma1
    else:
        a, b, c, d, g = sol.a2, sol.b2, sol.c2, sol.d2, sol.gamma2
    if sol.threshold > 0:
        # d x^g written relative to the threshold to keep magnitudes tame
        p = d * sol.threshold**g * (x / sol.threshold) ** g
    else:
        p = np.zeros_like(x)
    w = a * x * x + b * x + c + p
    w1 = 2 * a * x + b + g * p / x
    w2 = 2 * a + g * (g - 1) * p / (x * x)
    return w, w1, w2


def value(sol: SmoothingSolution, x):
    """``(w, w', w'')``; the upper branch applies on ``x >= threshold``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("value function is defined for x > 0")
    up = x >= sol.threshold
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        hi = _branch(sol, np.where(up, x, sol.threshold or 1.0), True)
        lo = _branch(sol, np.where(up, sol.threshold or 1.0, x), False)
    return tuple(np.where(up, h, l) for h, l in zip(hi, lo))


@dataclass(frozen=True)
class SmoothFit:
    value: float
    slope: float
    curvature: float
    slope_at_threshold: float

    def max(self) -> float:
        return max(self.value, self.slope, self.curvature, self.slope_at_threshold)


def verify_smooth_fit(sol: SmoothingSolution) -> SmoothFit:
    xt = sol.threshold
    if xt <= 0:
        return SmoothFit(0.0, 0.0, 0.0, 0.0)
    hi = [float(v) for v in _branch(sol, xt, True)]
    lo = [float(v) for v in _branch(sol, xt, False)]
    return SmoothFit(
        value=abs(hi[0] - lo[0]),
        slope=abs(hi[1] - lo[1]),
        curvature=abs(hi[2] - lo[2]),
        slope_at_threshold=max(abs(hi[1]), abs(lo[1])),
    )


def hjb_residual_smoothing(sol: SmoothingSolution, model: Model, x, swap_branches: bool = False):
    """``|(G+r) x w' + (x-xbar)^2 + sigma^2 x^2 w''/2 - lambda w|`` with G picked by sign(w')."""
    x = np.asarray(x, dtype=float)
    w, w1, w2 = value(sol, x)
    pos = w1 >= 0
    if swap_branches:
        pos = ~pos
    G = np.where(pos, sol.G1, sol.G2)
    r = float(model.rate.r0)
    xbar = _xbar(model)
    res = (G + r) * x * w1 + (x - xbar) ** 2 + 0.5 * model.sigma**2 * x * x * w2 - model.lam * w
    return np.abs(res)


def smoothing_policy(sol: SmoothingSolution, model: Model) -> ThresholdBangBang:
    gr = model.growth
    if isinstance(gr, LinearGrowth):
        if not gr.alpha.is_constant:
            raise NotApplicableError("smoothing policy needs constant alpha")
        if float(gr.alpha(model.z0)) == 1.0:
            raise DegenerateError("alpha == 1: the ratio does not respond to fiscal policy")
    return ThresholdBangBang(sol.threshold, below=sol.u_below, above=sol.u_above)


def value_table(sol: SmoothingSolution, xs) -> list[tuple[float, float, float, float]]:
    w, w1, w2 = value(sol, xs)
    return list(zip(np.asarray(xs, float).tolist(), w.tolist(), w1.tolist(), w2.tolist()))
