"""Monte Carlo for the controlled ratio and its factor.

X is advanced exactly in log-space with Z and u frozen over each step, Z by
Euler-Maruyama.  Path ``i`` draws its normals from ``PCG64(seed ^ i)`` so any
chunking or worker count yields the same numbers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import ControlViolationError, DomainError, HorizonOverflowError, ModelError
from .model import Model, lambda_m, validate

CHUNK = 4096
RECORD_CHUNK = 256
SLAB = 256
TRAJECTORY_COLUMNS = ("t", "z", "x", "u", "disc_cost", "disc_ratio")


@dataclass(frozen=True)
class PathConfig:
    dt: float = 1.0 / 252.0
    horizon: float = 10.0
    n_paths: int = 10_000
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ModelError(f"dt must be positive, got {self.dt}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ModelError(f"horizon must be positive, got {self.horizon}")
        if self.dt > self.horizon:
            raise ModelError(f"dt={self.dt} exceeds horizon={self.horizon}")
        if self.n_paths < 1:
            raise ModelError(f"n_paths must be >= 1, got {self.n_paths}")
        if not (0 <= self.seed < 2**64):
            raise ModelError("seed must be an unsigned 64-bit integer")

    @property
    def n_steps(self) -> int:
        return max(1, round(self.horizon / self.dt))

    def with_horizon(self, horizon: float) -> "PathConfig":
        return PathConfig(self.dt, horizon, self.n_paths, self.seed, self.antithetic)


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    x: np.ndarray
    u: np.ndarray
    disc_cost: np.ndarray
    disc_ratio: np.ndarray

    def rows(self):
        return zip(*(getattr(self, c).tolist() for c in TRAJECTORY_COLUMNS))


@dataclass
class _Block:
    """One chunk of paths.

    ``cost`` is the total discounted cost (paths,); ``samples`` maps a step
    index to ``(x, disc_ratio)``.  Full (paths, n_steps + 1) arrays are kept
    only when recording.
    """

    cost: np.ndarray
    samples: dict
    z: np.ndarray | None = None
    x: np.ndarray | None = None
    u: np.ndarray | None = None
    disc_cost: np.ndarray | None = None
    disc_ratio: np.ndarray | None = None


def _streams(cfg: PathConfig, idx: range):
    out = []
    for i in idx:
        src, sign = (i - 1, -1.0) if cfg.antithetic and i % 2 == 1 else (i, 1.0)
        out.append((np.random.Generator(np.random.PCG64(cfg.seed ^ src)), sign))
    return out


def _simulate_block(model: Model, policy, cfg: PathConfig, idx: range, x0: float, record: bool, sample_steps=()) -> _Block:
    n, N, dt = len(idx), cfg.n_steps, cfg.dt
    streams = _streams(cfg, idx)
    sq = math.sqrt(dt)
    rho = model.rho
    rho_c = math.sqrt(max(0.0, 1.0 - rho * rho))
    sigma = model.sigma
    lam = model.lam
    b = model.bounds
    wanted = set(sample_steps)

    z = np.full(n, float(model.z0))
    logx = np.zeros(n)
    r_int = np.zeros(n)
    cost = np.zeros(n)
    g_prev = None
    samples = {}
    if record:
        full = {k: np.empty((n, N + 1)) for k in ("z", "x", "u", "disc_cost", "disc_ratio")}

    xi = None
    for k in range(N + 1):
        if k < N and k % SLAB == 0:
            width = min(SLAB, N - k)
            xi = np.stack([sign * g.standard_normal((width, 2)) for g, sign in streams])
        x = x0 * np.exp(logx)
        u = np.asarray(policy(x, z), dtype=float)
        ok = b.contains(u)
        if not np.all(ok):
            raise ControlViolationError(f"policy emitted u={u[~ok][0]} outside [-{b.u1}, {b.u2}] at step {k}")
        g_now = math.exp(-lam * k * dt) * model.f(x, z, u)
        if g_prev is not None:
            cost += 0.5 * dt * (g_prev + g_now)
        g_prev = g_now
        if k in wanted:
            samples[k] = (x, np.exp(-r_int) * x)
        if record:
            full["z"][:, k] = z
            full["x"][:, k] = x
            full["u"][:, k] = u
            full["disc_cost"][:, k] = cost
            full["disc_ratio"][:, k] = np.exp(-r_int) * x
        if k == N:
            break
        j = k % SLAB
        dwz = sq * xi[:, j, 0]
        dw = rho * dwz + rho_c * sq * xi[:, j, 1]
        logx = logx + (model.drift_rate(z, u) - 0.5 * sigma**2) * dt + sigma * dw
        r_int = r_int + model.rate(z) * dt
        z = z + model.factor.drift(z) * dt + model.factor.vol(z) * dwz

    if record:
        return _Block(cost, samples, **full)
    return _Block(cost, samples)


def _blocks(model: Model, policy, cfg: PathConfig, x0: float | None = None, workers: int = 1, record=False, sample_steps=()):
    """Chunks of paths in path order; chunk boundaries never depend on ``workers``."""
    x0 = model.x0 if x0 is None else float(x0)
    if not x0 > 0:
        raise DomainError(f"initial ratio must be positive, got {x0}")
    step = RECORD_CHUNK if record else CHUNK  # both even: antithetic pairs stay together
    chunks = [range(s, min(s + step, cfg.n_paths)) for s in range(0, cfg.n_paths, step)]
    run = lambda idx: _simulate_block(model, policy, cfg, idx, x0, record, sample_steps)  # noqa: E731
    if workers <= 1:
        yield from map(run, chunks)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(run, chunks)


def simulate_paths(model: Model, policy, cfg: PathConfig, x0: float | None = None, workers: int = 1) -> list[Trajectory]:
    validate(model)
    t = cfg.dt * np.arange(cfg.n_steps + 1)
    out = []
    for blk in _blocks(model, policy, cfg, x0, workers, record=True):
        for j in range(blk.x.shape[0]):
            out.append(Trajectory(t, blk.z[j], blk.x[j], blk.u[j], blk.disc_cost[j], blk.disc_ratio[j]))
    return out


def write_trajectories_csv(trajs, target, long: bool = True) -> list[Path]:
    """Long format (one file, leading ``path`` column) or one file per path in a directory."""
    target = Path(target)
    fmt = lambda v: format(v, ".17g")  # noqa: E731
    written = []
    if long:
        with target.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("path",) + TRAJECTORY_COLUMNS)
            for i, tr in enumerate(trajs):
                for row in tr.rows():
                    w.writerow([str(i)] + [fmt(v) for v in row])
        return [target]
    target.mkdir(parents=True, exist_ok=True)
    width = max(1, len(str(len(trajs) - 1)))
    for i, tr in enumerate(trajs):
        p = target / f"path_{i:0{width}d}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_COLUMNS)
            for row in tr.rows():
                w.writerow([fmt(v) for v in row])
        written.append(p)
    return written


def _mean_stderr(samples: np.ndarray, antithetic: bool) -> tuple[float, float]:
    """Sample mean and its standard error; antithetic pairs count as one draw."""
    s = np.asarray(samples, dtype=float)
    if antithetic and s.size >= 2:
        even = s[: s.size // 2 * 2].reshape(-1, 2).mean(axis=1)
        s_eff = np.concatenate([even, s[even.size * 2 :]])
    else:
        s_eff = s
    mean = float(np.mean(s))
    if s_eff.size < 2:
        return mean, 0.0
    return mean, float(np.std(s_eff, ddof=1) / math.sqrt(s_eff.size))


# ------------------------------------------------------------------ cost


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    stderr: float
    tail_bound: float
    horizon: float
    n_paths: int

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "tail_bound": self.tail_bound,
            "horizon": self.horizon,
            "n_paths": self.n_paths,
        }


def tail_bound(model: Model, horizon: float, x0: float | None = None) -> float:
    """Bound on the discounted cost accrued after ``horizon``."""
    x0 = model.x0 if x0 is None else float(x0)
    C = model.cost_growth_constant
    m = model.cost.exponent
    gap = model.lam - lambda_m(model, m)
    if not gap > 0:
        raise ModelError(f"lambda={model.lam} does not exceed lambda_m={lambda_m(model, m)}")
    lam = model.lam
    return C * math.exp(-lam * horizon) / lam + C * x0**m * math.exp(-gap * horizon) / gap


def required_horizon(model: Model, cfg: PathConfig, eps: float, max_horizon: float, x0=None) -> float:
    """Smallest dt-multiple horizon >= ``cfg.horizon`` with tail bound below ``eps``."""
    tb = lambda T: tail_bound(model, T, x0) - eps  # noqa: E731
    if tb(cfg.horizon) < 0:
        return cfg.horizon
    if tb(max_horizon) >= 0:
        raise HorizonOverflowError(
            f"tail bound {tail_bound(model, max_horizon, x0):.3g} at max horizon {max_horizon} "
            f"still exceeds eps={eps}"
        )
    T = brentq(tb, cfg.horizon, max_horizon, xtol=1e-12)
    return min(max_horizon, math.ceil(T / cfg.dt + 1e-9) * cfg.dt)


def estimate_cost(
    model: Model,
    policy,
    cfg: PathConfig,
    eps: float = 1e-6,
    max_horizon: float = 200.0,
    x0: float | None = None,
    workers: int = 1,
) -> CostEstimate:
    validate(model)
    T = required_horizon(model, cfg, eps, max_horizon, x0)
    run = cfg.with_horizon(T)
    totals = np.concatenate([blk.cost for blk in _blocks(model, policy, run, x0, workers)])
    mean, se = _mean_stderr(totals, cfg.antithetic)
    return CostEstimate(mean, se, tail_bound(model, run.n_steps * run.dt, x0), run.n_steps * run.dt, cfg.n_paths)


def gbm_cost_closed_form(x: float, xbar: float, lam: float, mu: float, sigma: float) -> float:
    """Infinite-horizon discounted ``(X - xbar)^2`` for a GBM with log-free drift ``mu``."""
    return x * x / (lam - 2 * mu - sigma**2) - 2 * xbar * x / (lam - mu) + xbar * xbar / lam


# ----------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class MomentReport:
    m: float
    t: float
    empirical: float
    stderr: float
    bound: float
    passed: bool


def moment_bound_check(model: Model, policy, cfg: PathConfig, m: float, t: float, workers: int = 1) -> MomentReport:
    validate(model)
    if t > cfg.n_steps * cfg.dt + 1e-12 or t < 0:
        raise DomainError(f"t={t} outside [0, {cfg.horizon}]")
    k = round(t / cfg.dt)
    vals = np.concatenate([blk.samples[k][0] ** m for blk in _blocks(model, policy, cfg, None, workers, sample_steps=[k])])
    mean, se = _mean_stderr(vals, cfg.antithetic)
    bound = model.x0**m * math.exp(lambda_m(model, m) * k * cfg.dt)
    rel = se / mean if mean > 0 else 0.0
    return MomentReport(m, k * cfg.dt, mean, se, bound, bool(mean <= bound * (1.0 + 3.0 * rel)))


@dataclass(frozen=True)
class SustainabilityReport:
    horizons: tuple
    means: tuple
    slope: float
    monotone: bool
    sustainable: bool


def sustainability_check(model: Model, policy, cfg: PathConfig, horizons, x0=None, workers: int = 1) -> SustainabilityReport:
    validate(model)
    hs = [float(h) for h in horizons]
    if any(b <= a for a, b in zip(hs, hs[1:])):
        raise DomainError("horizons must be strictly increasing")
    run = cfg.with_horizon(max(cfg.horizon, hs[-1]))
    ks = [round(h / run.dt) for h in hs]
    sums = np.zeros(len(ks))
    for blk in _blocks(model, policy, run, x0, workers, sample_steps=ks):
        sums += np.array([blk.samples[k][1].sum() for k in ks])
    means = sums / run.n_paths
    times = np.array(ks) * run.dt
    x_start = model.x0 if x0 is None else float(x0)
    t_fit = np.concatenate([[0.0], times])
    y_fit = np.log(np.concatenate([[x_start], means]))
    slope = float(np.polyfit(t_fit, y_fit, 1)[0])
    monotone = bool(np.all(np.diff(np.concatenate([[x_start], means])) <= 0))
    return SustainabilityReport(tuple(times.tolist()), tuple(means.tolist()), slope, monotone, slope < 0)


@dataclass(frozen=True)
class CovariationReport:
    t: float
    covariation: float
    formula: float
    max_abs_gap: float
    pathwise_max_gap: float


def covariation_diagnostic(model: Model, u_fixed: float, cfg: PathConfig, workers: int = 1) -> CovariationReport:
    """Realized covariation of r(Z) and g(Z, u) against its Ito integral.

    ``max_abs_gap`` is the sup over time of the path-averaged gap; the
    per-path gap carries an additional O(sqrt(dt)) martingale term and is
    reported separately.
    """
    validate(model)
    if model.rate.family == "constant":
        return CovariationReport(cfg.n_steps * cfg.dt, 0.0, 0.0, 0.0, 0.0)
    const = _ConstantU(float(u_fixed))
    gap_sum = np.zeros(cfg.n_steps + 1)
    cov_sum = 0.0
    form_sum = 0.0
    path_max = 0.0
    for blk in _blocks(model, const, cfg, None, workers, record=True):
        z = blk.z
        r = model.rate(z)
        g = model.growth(z, u_fixed)
        cov = np.zeros_like(z)
        cov[:, 1:] = np.cumsum(np.diff(r, axis=1) * np.diff(g, axis=1), axis=1)
        dens = model.growth.dz(z, u_fixed) * model.rate.derivative(z) * model.factor.vol(z) ** 2
        form = np.zeros_like(z)
        form[:, 1:] = np.cumsum(dens[:, :-1] * cfg.dt, axis=1)
        gap = cov - form
        gap_sum += gap.sum(axis=0)
        cov_sum += cov[:, -1].sum()
        form_sum += form[:, -1].sum()
        path_max = max(path_max, float(np.max(np.abs(gap))))
    n = cfg.n_paths
    return CovariationReport(
        cfg.n_steps * cfg.dt, float(cov_sum / n), float(form_sum / n), float(np.max(np.abs(gap_sum / n))), path_max
    )


@dataclass(frozen=True)
class _ConstantU:
    u: float

    def __call__(self, x, z=0.0):
        return np.full(np.shape(x), self.u)
