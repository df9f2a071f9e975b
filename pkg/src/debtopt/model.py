"""Parametric model families for the controlled debt-to-GDP ratio.

The state is the ratio ``X`` driven by

    dX = X [(r(Z) - g(Z, u) - u) dt + sigma dW],     dZ = b_Z(Z) dt + sigma_Z(Z) dW^Z,

with ``corr(W, W^Z) = rho`` and a fiscal control ``u`` (primary balance over debt)
confined to ``[-U1, U2]``.  Every component is a small frozen dataclass so that
a model round-trips through JSON without loss.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Union

import numpy as np

from .errors import (
    ConfigError,
    DegenerateError,
    InvalidExponentError,
    ModelValidationError,
    NotApplicableError,
)

RATE_FLOOR = 1e-6
LATTICE_SIZE = 256
GROWTH_BOUND_EPS = 1e-6
_LATTICE_HORIZON = 10.0


@dataclass(frozen=True)
class Affine:
    """``clip(c0 + c1 * z, lo, hi)``; ``c1 == 0`` is the constant family."""

    c0: float
    c1: float = 0.0
    lo: float = -math.inf
    hi: float = math.inf

    def __call__(self, z):
        return np.clip(self.c0 + self.c1 * np.asarray(z, dtype=float), self.lo, self.hi)

    def derivative(self, z):
        raw = self.c0 + self.c1 * np.asarray(z, dtype=float)
        return np.where((raw > self.lo) & (raw < self.hi), self.c1, 0.0)

    @property
    def is_constant(self) -> bool:
        return self.c1 == 0.0 or self.lo == self.hi


def _const(value) -> Affine:
    return value if isinstance(value, Affine) else Affine(float(value))


@dataclass(frozen=True)
class Factor:
    """Exogenous factor ``Z``: ``none``, ``constant`` (b, c) or ``ou`` (kappa, theta, c)."""

    family: str = "none"
    b: float = 0.0
    c: float = 0.0
    kappa: float = 0.0
    theta: float = 0.0

    def drift(self, z):
        z = np.asarray(z, dtype=float)
        if self.family == "ou":
            return self.kappa * (self.theta - z)
        if self.family == "constant":
            return np.full_like(z, self.b)
        return np.zeros_like(z)

    def vol(self, z):
        z = np.asarray(z, dtype=float)
        if self.family == "none":
            return np.zeros_like(z)
        return np.full_like(z, self.c)

    @property
    def is_degenerate(self) -> bool:
        return self.family == "none" or (self.c == 0.0 and self.b == 0.0 and self.family == "constant")

    def z_range(self, z0: float) -> tuple[float, float]:
        """Six-sigma range of the factor (OU: stationary law; constant: 10-year spread)."""
        if self.family == "ou" and self.kappa > 0:
            sd = self.c / math.sqrt(2.0 * self.kappa)
            return min(z0, self.theta - 6 * sd), max(z0, self.theta + 6 * sd)
        if self.family == "constant":
            spread = abs(self.b) * _LATTICE_HORIZON + 6 * self.c * math.sqrt(_LATTICE_HORIZON)
            return z0 - spread, z0 + spread
        return z0, z0


@dataclass(frozen=True)
class Rate:
    """Interest rate: constant ``r0`` or ``clip(r0 + r1 z, floor, cap)``."""

    r0: float
    r1: float = 0.0
    cap: float | None = None
    floor: float = RATE_FLOOR

    @property
    def family(self) -> str:
        return "constant" if self.r1 == 0.0 else "affine"

    @property
    def R(self) -> float:
        if self.cap is not None:
            return float(self.cap)
        if self.family == "constant":
            return float(self.r0)
        return math.inf

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.family == "constant":
            return np.full_like(z, self.r0)
        hi = math.inf if self.cap is None else self.cap
        return np.clip(self.r0 + self.r1 * z, self.floor, hi)

    def derivative(self, z):
        z = np.asarray(z, dtype=float)
        if self.family == "constant":
            return np.zeros_like(z)
        raw = self.r0 + self.r1 * z
        hi = math.inf if self.cap is None else self.cap
        return np.where((raw > self.floor) & (raw < hi), self.r1, 0.0)


@dataclass(frozen=True)
class LinearGrowth:
    """``g(z, u) = g0(z) - alpha(z) u``."""

    g0: Affine
    alpha: Affine
    gbar1: float | None = None
    gbar2: float | None = None

    family = "linear_u"

    def __post_init__(self):
        object.__setattr__(self, "g0", _const(self.g0))
        object.__setattr__(self, "alpha", _const(self.alpha))

    def __call__(self, z, u):
        return self.g0(z) - self.alpha(z) * np.asarray(u, dtype=float)

    def du(self, z, u):
        return -self.alpha(z) + 0.0 * np.asarray(u, dtype=float)

    def duu(self, z, u):
        return 0.0 * (np.asarray(z, dtype=float) + np.asarray(u, dtype=float))

    def dz(self, z, u):
        return self.g0.derivative(z) - self.alpha.derivative(z) * np.asarray(u, dtype=float)

    @property
    def is_constant(self) -> bool:
        return self.g0.is_constant and self.alpha.is_constant


@dataclass(frozen=True)
class ConcaveQuadraticGrowth:
    """``g(z, u) = g0(z) - alpha(z) u - beta(z) u**2`` with ``beta > 0``."""

    g0: Affine
    alpha: Affine
    beta: Affine
    gbar1: float | None = None
    gbar2: float | None = None

    family = "concave_quadratic_u"

    def __post_init__(self):
        object.__setattr__(self, "g0", _const(self.g0))
        object.__setattr__(self, "alpha", _const(self.alpha))
        object.__setattr__(self, "beta", _const(self.beta))

    def __call__(self, z, u):
        u = np.asarray(u, dtype=float)
        return self.g0(z) - self.alpha(z) * u - self.beta(z) * u**2

    def du(self, z, u):
        return -self.alpha(z) - 2.0 * self.beta(z) * np.asarray(u, dtype=float)

    def duu(self, z, u):
        return -2.0 * self.beta(z) + 0.0 * np.asarray(u, dtype=float)

    def dz(self, z, u):
        u = np.asarray(u, dtype=float)
        return self.g0.derivative(z) - self.alpha.derivative(z) * u - self.beta.derivative(z) * u**2

    @property
    def is_constant(self) -> bool:
        return self.g0.is_constant and self.alpha.is_constant and self.beta.is_constant


Growth = Union[LinearGrowth, ConcaveQuadraticGrowth]


@dataclass(frozen=True)
class ControlBounds:
    u1: float
    u2: float

    def clip(self, u):
        return np.clip(u, -self.u1, self.u2)

    def contains(self, u, atol: float = 1e-12):
        u = np.asarray(u, dtype=float)
        return (u >= -self.u1 - atol) & (u <= self.u2 + atol)


@dataclass(frozen=True)
class PowerCost:
    """``f = C(z) x**m`` (plus an optional ``penalty * u**2``)."""

    C: Affine
    m: float
    control_penalty: float = 0.0

    family = "power"

    def __post_init__(self):
        object.__setattr__(self, "C", _const(self.C))

    def __call__(self, x, z, u=0.0):
        x = np.asarray(x, dtype=float)
        return self.C(z) * x**self.m + self.control_penalty * np.asarray(u, dtype=float) ** 2

    def du(self, x, z, u):
        return 2.0 * self.control_penalty * np.asarray(u, dtype=float) + 0.0 * np.asarray(x, dtype=float)

    def duu(self, x, z, u):
        return 2.0 * self.control_penalty + 0.0 * np.asarray(x, dtype=float)

    @property
    def exponent(self) -> float:
        return float(self.m)

    @property
    def depends_on_u(self) -> bool:
        return self.control_penalty != 0.0

    def growth_constant(self, z_lattice, bounds: ControlBounds) -> float:
        umax = max(bounds.u1, bounds.u2)
        return float(np.max(self.C(z_lattice))) + self.control_penalty * umax**2


@dataclass(frozen=True)
class QuadraticDistanceCost:
    """``f = (x - xbar)**2`` (plus an optional ``penalty * u**2``)."""

    xbar: float
    control_penalty: float = 0.0

    family = "quadratic_distance"
    m = 2.0

    def __call__(self, x, z=0.0, u=0.0):
        x = np.asarray(x, dtype=float)
        return (x - self.xbar) ** 2 + self.control_penalty * np.asarray(u, dtype=float) ** 2

    def du(self, x, z, u):
        return 2.0 * self.control_penalty * np.asarray(u, dtype=float) + 0.0 * np.asarray(x, dtype=float)

    def duu(self, x, z, u):
        return 2.0 * self.control_penalty + 0.0 * np.asarray(x, dtype=float)

    @property
    def exponent(self) -> float:
        return 2.0

    @property
    def depends_on_u(self) -> bool:
        return self.control_penalty != 0.0

    def growth_constant(self, z_lattice, bounds: ControlBounds) -> float:
        # (x - xbar)^2 <= 2 x^2 + 2 xbar^2
        umax = max(bounds.u1, bounds.u2)
        return max(2.0, 2.0 * self.xbar**2) + self.control_penalty * umax**2


Cost = Union[PowerCost, QuadraticDistanceCost]


@dataclass(frozen=True)
class Model:
    rate: Rate
    growth: Growth
    bounds: ControlBounds
    sigma: float
    lam: float
    cost: Cost
    rho: float = 0.0
    factor: Factor = field(default_factory=Factor)
    x0: float = 1.0
    z0: float = 0.0

    @cached_property
    def z_lattice(self) -> np.ndarray:
        lo, hi = self.factor.z_range(self.z0)
        if lo == hi:
            return np.array([self.z0], dtype=float)
        return np.linspace(lo, hi, LATTICE_SIZE)

    @cached_property
    def u_lattice(self) -> np.ndarray:
        u1, u2 = self.bounds.u1, self.bounds.u2
        if not (math.isfinite(u1) and math.isfinite(u2)):
            return np.array([-u1, u2], dtype=float)
        return np.linspace(-u1, u2, LATTICE_SIZE)

    @cached_property
    def _sampled_growth(self) -> tuple[float, float]:
        zz, uu = np.meshgrid(self.z_lattice, self.u_lattice, indexing="ij")
        g = self.growth(zz, uu)
        return float(np.min(g)), float(np.max(g))

    @property
    def gbar1(self) -> float:
        if self.growth.gbar1 is not None:
            return float(self.growth.gbar1)
        return min(self._sampled_growth[0], -GROWTH_BOUND_EPS)

    @property
    def gbar2(self) -> float:
        if self.growth.gbar2 is not None:
            return float(self.growth.gbar2)
        return max(self._sampled_growth[1], GROWTH_BOUND_EPS)

    @property
    def R(self) -> float:
        return self.rate.R

    @property
    def is_constant_coefficient(self) -> bool:
        # the factor may still move; nothing observed depends on it
        cost_const = not isinstance(self.cost, PowerCost) or self.cost.C.is_constant
        return self.rate.family == "constant" and self.growth.is_constant and cost_const

    def f(self, x, z, u):
        return self.cost(x, z, u)

    def drift_rate(self, z, u):
        """Instantaneous log-drift ``r(z) - g(z, u) - u`` before the Ito correction."""
        return self.rate(z) - self.growth(z, u) - np.asarray(u, dtype=float)

    @property
    def cost_growth_constant(self) -> float:
        return self.cost.growth_constant(self.z_lattice, self.bounds)

    def replace(self, **changes) -> "Model":
        return replace(self, **changes)


def lambda_m(model: Model, m: float) -> float:
    """Growth rate of the m-th moment bound ``E[X_t^m] <= x^m exp(lambda_m t)``."""
    if not m > 0:
        raise InvalidExponentError(f"moment exponent must be positive, got {m}")
    return m * (model.R - model.gbar1 + model.bounds.u1) + m * (m - 1) * model.sigma**2 / 2


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


def violations(model: Model) -> list[Violation]:
    out: list[Violation] = []

    def bad(code, msg):
        out.append(Violation(code, msg))

    b = model.bounds
    if not (math.isfinite(b.u1) and math.isfinite(b.u2)):
        bad("bounds-nonfinite", f"U1={b.u1}, U2={b.u2}")
    if not (b.u1 > 0 and b.u2 > 0):
        bad("bounds-nonpositive", f"U1={b.u1}, U2={b.u2} must be > 0")
    if not model.sigma >= 0:
        bad("sigma-negative", f"sigma={model.sigma}")
    if not -1.0 <= model.rho <= 1.0:
        bad("rho-out-of-range", f"rho={model.rho}")
    if not model.x0 > 0:
        bad("x0-nonpositive", f"x0={model.x0}")

    fac = model.factor
    if fac.family not in ("none", "constant", "ou"):
        bad("factor-invalid", f"unknown factor family {fac.family!r}")
    elif fac.family == "ou" and not (fac.kappa > 0 and fac.c >= 0):
        bad("factor-invalid", f"OU needs kappa > 0 and c >= 0 (kappa={fac.kappa}, c={fac.c})")
    elif fac.family == "constant" and fac.c < 0:
        bad("factor-invalid", f"volatility c={fac.c} < 0")

    zl = model.z_lattice
    rate = model.rate
    if not math.isfinite(rate.R):
        bad("rate-unbounded", "rate needs a finite cap R")
    elif not rate.R > 0:
        bad("rate-nonpositive", f"R={rate.R} must be strictly positive")
    else:
        rv = rate(zl)
        if np.any(rv > rate.R * (1 + 1e-12)):
            bad("rate-unbounded", f"r(z) exceeds R={rate.R} on the z-lattice")
        if np.any(rv <= 0):
            bad("rate-nonpositive", "r(z) must be strictly positive")

    gr = model.growth
    if np.any(gr.alpha(zl) < 0):
        bad("alpha-negative", "alpha(z) must be nonnegative")
    if isinstance(gr, ConcaveQuadraticGrowth) and np.any(gr.beta(zl) <= 0):
        bad("growth-not-concave", "beta(z) must be strictly positive")
    if not (model.gbar1 < 0 < model.gbar2):
        bad("growth-bounds-sign", f"need gbar1 < 0 < gbar2 (got {model.gbar1}, {model.gbar2})")
    if all(v.code != "bounds-nonpositive" for v in out):
        gmin, gmax = model._sampled_growth
        if gmin < model.gbar1 - 1e-12 or gmax > model.gbar2 + 1e-12:
            bad(
                "growth-unbounded",
                f"g ranges over [{gmin:.6g}, {gmax:.6g}] outside [{model.gbar1}, {model.gbar2}]",
            )

    cost = model.cost
    if cost.control_penalty < 0:
        bad("cost-negative", "control penalty must be nonnegative")
    if isinstance(cost, PowerCost):
        if not cost.m > 0:
            bad("cost-exponent", f"m={cost.m} must be positive")
        if np.any(cost.C(zl) < 0):
            bad("cost-negative", "C(z) must be nonnegative")
    elif isinstance(cost, QuadraticDistanceCost):
        if not cost.xbar >= 0:
            bad("xbar-negative", f"xbar={cost.xbar}")

    if not model.lam > 0:
        bad("lambda-nonpositive", f"lambda={model.lam}")
    elif cost.exponent > 0 and math.isfinite(model.R):
        lm = lambda_m(model, cost.exponent)
        if not model.lam > lm:
            bad("lambda-too-small", f"lambda={model.lam} must exceed lambda_m={lm:.6g}")
    return out


def validate(model: Model) -> Model:
    """Return ``model`` unchanged, or raise with every violated constraint."""
    found = violations(model)
    if found:
        raise ModelValidationError(found)
    return model


class Economy(enum.Enum):
    STRONG = "strong"
    WEAK = "weak"
    BOUNDARY = "boundary"


def _require_constant(model: Model, what: str) -> tuple[float, float]:
    if model.rate.family != "constant" or not model.growth.g0.is_constant:
        raise NotApplicableError(f"{what} needs a constant rate and growth baseline")
    return float(model.rate.r0), float(model.growth.g0.c0)


def classify_economy(model: Model, rtol: float = 1e-12) -> Economy:
    r, g0 = _require_constant(model, "economy classification")
    lhs = g0 + model.sigma**2 / 2
    if math.isclose(lhs, r, rel_tol=rtol, abs_tol=1e-15):
        return Economy.BOUNDARY
    return Economy.STRONG if lhs > r else Economy.WEAK


@dataclass(frozen=True)
class SustainabilityBounds:
    deficit_sustainable: bool
    surplus_sustainable: bool
    g0_min: float
    deficit_threshold: float  # -g0_min / (alpha - 1)
    surplus_threshold: float  # -g0_min / (1 - alpha)


def sustainability_bounds(model: Model) -> SustainabilityBounds:
    gr = model.growth
    if not isinstance(gr, LinearGrowth) or not gr.alpha.is_constant:
        raise NotApplicableError("sustainability bounds need linear growth with constant alpha")
    alpha = float(gr.alpha(model.z0))
    if alpha == 1.0:
        raise DegenerateError("alpha == 1: fiscal policy has no net effect on the ratio")
    g0_min = float(np.min(gr.g0(model.z_lattice)))
    u1, u2 = model.bounds.u1, model.bounds.u2
    return SustainabilityBounds(
        deficit_sustainable=bool(u1 * (1 - alpha) < g0_min),
        surplus_sustainable=bool(u2 * (alpha - 1) < g0_min),
        g0_min=g0_min,
        deficit_threshold=-g0_min / (alpha - 1),
        surplus_threshold=-g0_min / (1 - alpha),
    )


def constant_model(
    r: float = 0.01,
    g0: float = 0.03,
    alpha: float = 0.9,
    sigma: float = 0.2,
    lam: float = 5.0,
    u1: float = 1.0,
    u2: float | None = None,
    cost: Cost | None = None,
    beta: float | None = None,
    x0: float = 0.7,
    rho: float = 0.0,
    gbar1: float | None = None,
    gbar2: float | None = None,
) -> Model:
    """Constant-coefficient model; defaults are the reference scenario (x0 = 0.7)."""
    if cost is None:
        cost = QuadraticDistanceCost(0.6)
    if beta is None:
        growth: Growth = LinearGrowth(Affine(g0), Affine(alpha), gbar1, gbar2)
    else:
        growth = ConcaveQuadraticGrowth(Affine(g0), Affine(alpha), Affine(beta), gbar1, gbar2)
    return Model(
        rate=Rate(r),
        growth=growth,
        bounds=ControlBounds(u1, u1 if u2 is None else u2),
        sigma=sigma,
        lam=lam,
        cost=cost,
        rho=rho,
        x0=x0,
    )


# ---------------------------------------------------------------- JSON schema


def _take(doc: dict, path: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object, got {type(doc).__name__}")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(doc)
    if missing:
        raise ConfigError(f"{path}: missing keys {sorted(missing)}")
    return doc


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _opt(doc, key, path, default=None):
    return _num(doc[key], f"{path}.{key}") if key in doc else default


def _scalar_fn(value, path: str) -> Affine:
    if isinstance(value, dict):
        fam = value.get("family", "affine")
        if fam == "constant":
            _take(value, path, {"family", "value"}, {"value"})
            return Affine(_num(value["value"], f"{path}.value"))
        if fam != "affine":
            raise ConfigError(f"{path}.family: unknown family {fam!r}")
        _take(value, path, {"family", "c0", "c1", "lo", "hi"}, {"c0"})
        return Affine(
            _num(value["c0"], f"{path}.c0"),
            _opt(value, "c1", path, 0.0),
            _opt(value, "lo", path, -math.inf),
            _opt(value, "hi", path, math.inf),
        )
    return Affine(_num(value, path))


def _scalar_fn_doc(fn: Affine):
    if fn.c1 == 0.0 and fn.lo == -math.inf and fn.hi == math.inf:
        return fn.c0
    doc: dict[str, Any] = {"family": "affine", "c0": fn.c0, "c1": fn.c1}
    if fn.lo != -math.inf:
        doc["lo"] = fn.lo
    if fn.hi != math.inf:
        doc["hi"] = fn.hi
    return doc


def model_from_dict(doc: dict) -> Model:
    p = "model"
    _take(
        doc, p,
        {"rate", "growth", "sigma", "rho", "lambda", "bounds", "cost", "factor", "x0", "z0"},
        {"rate", "growth", "sigma", "lambda", "bounds", "cost"},
    )

    rd = doc["rate"]
    fam = rd.get("family") if isinstance(rd, dict) else None
    if fam == "constant":
        _take(rd, f"{p}.rate", {"family", "r"}, {"r"})
        rate = Rate(_num(rd["r"], f"{p}.rate.r"))
    elif fam == "affine":
        _take(rd, f"{p}.rate", {"family", "r0", "r1", "cap", "floor"}, {"r0", "r1", "cap"})
        rate = Rate(
            _num(rd["r0"], f"{p}.rate.r0"),
            _num(rd["r1"], f"{p}.rate.r1"),
            _num(rd["cap"], f"{p}.rate.cap"),
            _opt(rd, "floor", f"{p}.rate", RATE_FLOOR),
        )
    else:
        raise ConfigError(f"{p}.rate.family: expected 'constant' or 'affine', got {fam!r}")

    gd = doc["growth"]
    fam = gd.get("family") if isinstance(gd, dict) else None
    common = {"family", "g0", "alpha", "gbar1", "gbar2"}
    if fam == "linear_u":
        _take(gd, f"{p}.growth", common, {"g0", "alpha"})
        growth: Growth = LinearGrowth(
            _scalar_fn(gd["g0"], f"{p}.growth.g0"),
            _scalar_fn(gd["alpha"], f"{p}.growth.alpha"),
            _opt(gd, "gbar1", f"{p}.growth"),
            _opt(gd, "gbar2", f"{p}.growth"),
        )
    elif fam == "concave_quadratic_u":
        _take(gd, f"{p}.growth", common | {"beta"}, {"g0", "alpha", "beta"})
        growth = ConcaveQuadraticGrowth(
            _scalar_fn(gd["g0"], f"{p}.growth.g0"),
            _scalar_fn(gd["alpha"], f"{p}.growth.alpha"),
            _scalar_fn(gd["beta"], f"{p}.growth.beta"),
            _opt(gd, "gbar1", f"{p}.growth"),
            _opt(gd, "gbar2", f"{p}.growth"),
        )
    else:
        raise ConfigError(f"{p}.growth.family: unknown family {fam!r}")

    bd = _take(doc["bounds"], f"{p}.bounds", {"u1", "u2"}, {"u1", "u2"})
    bounds = ControlBounds(_num(bd["u1"], f"{p}.bounds.u1"), _num(bd["u2"], f"{p}.bounds.u2"))

    cd = doc["cost"]
    fam = cd.get("family") if isinstance(cd, dict) else None
    if fam == "quadratic_distance":
        _take(cd, f"{p}.cost", {"family", "xbar", "control_penalty"}, {"xbar"})
        cost: Cost = QuadraticDistanceCost(
            _num(cd["xbar"], f"{p}.cost.xbar"), _opt(cd, "control_penalty", f"{p}.cost", 0.0)
        )
    elif fam == "power":
        _take(cd, f"{p}.cost", {"family", "C", "m", "control_penalty"}, {"C", "m"})
        cost = PowerCost(
            _scalar_fn(cd["C"], f"{p}.cost.C"),
            _num(cd["m"], f"{p}.cost.m"),
            _opt(cd, "control_penalty", f"{p}.cost", 0.0),
        )
    else:
        raise ConfigError(f"{p}.cost.family: unknown family {fam!r}")

    fd = doc.get("factor", {"family": "none"})
    fam = fd.get("family") if isinstance(fd, dict) else None
    if fam == "none":
        _take(fd, f"{p}.factor", {"family"})
        factor = Factor()
    elif fam == "constant":
        _take(fd, f"{p}.factor", {"family", "b", "c"}, {"b", "c"})
        factor = Factor("constant", b=_num(fd["b"], "b"), c=_num(fd["c"], "c"))
    elif fam == "ou":
        _take(fd, f"{p}.factor", {"family", "kappa", "theta", "c"}, {"kappa", "theta", "c"})
        factor = Factor(
            "ou", kappa=_num(fd["kappa"], "kappa"), theta=_num(fd["theta"], "theta"), c=_num(fd["c"], "c")
        )
    else:
        raise ConfigError(f"{p}.factor.family: unknown family {fam!r}")

    return Model(
        rate=rate,
        growth=growth,
        bounds=bounds,
        sigma=_num(doc["sigma"], f"{p}.sigma"),
        lam=_num(doc["lambda"], f"{p}.lambda"),
        cost=cost,
        rho=_opt(doc, "rho", p, 0.0),
        factor=factor,
        x0=_opt(doc, "x0", p, 1.0),
        z0=_opt(doc, "z0", p, 0.0),
    )


def model_to_dict(model: Model) -> dict:
    rate = model.rate
    if rate.family == "constant" and rate.cap is None:
        rd: dict[str, Any] = {"family": "constant", "r": rate.r0}
    else:
        rd = {"family": "affine", "r0": rate.r0, "r1": rate.r1, "cap": rate.R, "floor": rate.floor}
    gr = model.growth
    gd: dict[str, Any] = {
        "family": gr.family,
        "g0": _scalar_fn_doc(gr.g0),
        "alpha": _scalar_fn_doc(gr.alpha),
    }
    if isinstance(gr, ConcaveQuadraticGrowth):
        gd["beta"] = _scalar_fn_doc(gr.beta)
    if gr.gbar1 is not None:
        gd["gbar1"] = gr.gbar1
    if gr.gbar2 is not None:
        gd["gbar2"] = gr.gbar2
    cost = model.cost
    if isinstance(cost, QuadraticDistanceCost):
        cd: dict[str, Any] = {"family": "quadratic_distance", "xbar": cost.xbar}
    else:
        cd = {"family": "power", "C": _scalar_fn_doc(cost.C), "m": cost.m}
    if cost.control_penalty:
        cd["control_penalty"] = cost.control_penalty
    fac = model.factor
    if fac.family == "none":
        fd: dict[str, Any] = {"family": "none"}
    elif fac.family == "constant":
        fd = {"family": "constant", "b": fac.b, "c": fac.c}
    else:
        fd = {"family": "ou", "kappa": fac.kappa, "theta": fac.theta, "c": fac.c}
    return {
        "rate": rd,
        "growth": gd,
        "sigma": model.sigma,
        "rho": model.rho,
        "lambda": model.lam,
        "bounds": {"u1": model.bounds.u1, "u2": model.bounds.u2},
        "cost": cd,
        "factor": fd,
        "x0": model.x0,
        "z0": model.z0,
    }
