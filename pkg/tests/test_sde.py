import csv
import math

import numpy as np
import pytest

from conftest import gbm_cost
from debtopt.errors import ControlViolationError, HorizonOverflowError, ModelError
from debtopt.model import Affine, Factor, LinearGrowth, PowerCost, QuadraticDistanceCost, Rate, constant_model, lambda_m
from debtopt.policy import ConstantPolicy, ThresholdBangBang
from debtopt.sde import (
    TRAJECTORY_COLUMNS,
    PathConfig,
    covariation_diagnostic,
    estimate_cost,
    gbm_cost_closed_form,
    moment_bound_check,
    simulate_paths,
    sustainability_check,
    tail_bound,
    write_trajectories_csv,
)

FAST = PathConfig(dt=0.01, horizon=2.0, n_paths=2000, seed=42)


def driftless(sigma=0.2):
    # r = g0 and alpha = 1 leave r - g - u = 0 for u = 0
    return constant_model(r=0.03, g0=0.03, alpha=1.0, sigma=sigma)


def cov_model(dt):
    return constant_model().replace(
        rate=Rate(0.02, 0.05, cap=0.5),
        growth=LinearGrowth(Affine(0.03, 0.03, -0.4, 0.4), 0.9, gbar1=-1.5, gbar2=1.5),
        factor=Factor("constant", b=1.0, c=0.1),
        lam=8.0,
    ), PathConfig(dt=dt, horizon=1.0, n_paths=4000, seed=9)


class TestSimulate:
    def test_driftless_log_mean(self):
        trajs = simulate_paths(driftless(), ConstantPolicy(0.0), FAST)
        logs = np.array([math.log(t.x[-1] / t.x[0]) for t in trajs])
        se = logs.std(ddof=1) / math.sqrt(logs.size)
        assert abs(logs.mean() + 0.02 * 2.0) < 3 * se

    def test_explosive_mean(self):
        m = constant_model(r=0.05, g0=0.01)
        trajs = simulate_paths(m, ConstantPolicy(0.0), FAST)
        xt = np.array([t.x[-1] for t in trajs])
        rel = xt.std(ddof=1) / math.sqrt(xt.size) / xt.mean()
        assert xt.mean() >= 0.7 * math.exp(0.04 * 2.0) * (1 - 3 * rel)

    def test_degenerate_factor_constant(self, table1):
        for t in simulate_paths(table1, ConstantPolicy(0.3), PathConfig(dt=0.01, horizon=1, n_paths=5)):
            assert np.all(t.z == t.z[0])

    def test_trajectory_invariants(self, table1):
        for t in simulate_paths(table1, ThresholdBangBang(0.6, -1.0, 1.0), PathConfig(dt=0.01, horizon=3, n_paths=20)):
            assert len({len(getattr(t, c)) for c in TRAJECTORY_COLUMNS}) == 1
            assert np.all(t.x > 0)
            assert np.all(np.diff(t.disc_cost) >= 0)

    def test_control_violation_names_step(self, table1):
        with pytest.raises(ControlViolationError, match="step"):
            simulate_paths(table1, ConstantPolicy(1.5), PathConfig(dt=0.01, horizon=1, n_paths=2))

    def test_pathwise_monotone_and_linear(self, table1):
        pol = ConstantPolicy(0.3)
        cfg = PathConfig(dt=0.01, horizon=2, n_paths=10, seed=4)
        a = simulate_paths(table1, pol, cfg, x0=0.4)
        b = simulate_paths(table1, pol, cfg, x0=0.9)
        c = simulate_paths(table1, pol, cfg, x0=0.25 * 0.4 + 0.75 * 0.9)
        for ta, tb, tc in zip(a, b, c):
            assert np.all(ta.x <= tb.x)
            assert np.allclose(tc.x, 0.25 * ta.x + 0.75 * tb.x, rtol=1e-12)

    def test_worker_count_irrelevant(self, table1):
        pol = ThresholdBangBang(0.6, -1.0, 1.0)
        cfg = PathConfig(dt=0.01, horizon=1, n_paths=300, seed=7)
        one = simulate_paths(table1, pol, cfg, workers=1)
        four = simulate_paths(table1, pol, cfg, workers=4)
        for p, q in zip(one, four):
            for c in TRAJECTORY_COLUMNS:
                assert np.array_equal(getattr(p, c), getattr(q, c))

    def test_antithetic_pairs_mirror(self, table1):
        cfg = PathConfig(dt=0.01, horizon=1, n_paths=2, seed=3, antithetic=True)
        a, b = simulate_paths(driftless(), ConstantPolicy(0.0), cfg)
        assert np.allclose(np.log(a.x / 0.7), -np.log(b.x / 0.7) - 2 * 0.02 * a.t, atol=1e-12)

    def test_csv_header(self, table1, tmp_path):
        trajs = simulate_paths(table1, ConstantPolicy(0.0), PathConfig(dt=0.1, horizon=1, n_paths=2))
        (path,) = write_trajectories_csv(trajs, tmp_path / "traj.csv")
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["path", *TRAJECTORY_COLUMNS]
        assert len(rows) == 1 + 2 * 11
        files = write_trajectories_csv(trajs, tmp_path / "paths", long=False)
        with open(files[0]) as fh:
            assert next(csv.reader(fh)) == list(TRAJECTORY_COLUMNS)

    def test_invalid_config(self):
        with pytest.raises(ModelError):
            PathConfig(n_paths=0)
        with pytest.raises(ModelError):
            PathConfig(dt=2.0, horizon=1.0)


class TestCost:
    @pytest.mark.parametrize("u", [-0.5, 0.3, 1.0])
    def test_gbm_closed_form(self, table1, u):
        est = estimate_cost(table1, ConstantPolicy(u), PathConfig(dt=0.01, n_paths=4000, seed=11))
        mu = 0.01 - 0.03 - 0.1 * u
        ref = gbm_cost(0.7, 0.6, 5.0, mu, 0.2)
        assert ref == pytest.approx(gbm_cost_closed_form(0.7, 0.6, 5.0, mu, 0.2), rel=1e-14)
        assert abs(est.mean - ref) < 3 * est.stderr + est.tail_bound

    def test_zero_cost(self, table1):
        est = estimate_cost(table1.replace(cost=PowerCost(0.0, 2)), ConstantPolicy(0.3), FAST)
        assert est.mean == 0.0 and est.tail_bound == 0.0

    def test_pinned(self):
        m = constant_model(sigma=0.0, x0=0.6)
        est = estimate_cost(m, ConstantPolicy(-0.2), PathConfig(dt=0.01, n_paths=3))
        assert est.mean < 1e-20

    def test_nondecreasing_in_x(self):
        m = constant_model(cost=PowerCost(1.0, 2))
        pol = ThresholdBangBang(0.6, -1.0, 1.0)
        cfg = PathConfig(dt=0.01, n_paths=500, seed=5)
        costs = [estimate_cost(m, pol, cfg, x0=x).mean for x in (0.3, 0.6, 0.9)]
        assert costs[0] <= costs[1] <= costs[2]

    def test_tail_bound_reported(self, table1):
        est = estimate_cost(table1, ConstantPolicy(0.0), FAST, eps=1e-4)
        assert 0 <= est.tail_bound < 1e-4
        assert est.horizon >= 2.0 and est.horizon / 0.01 == pytest.approx(round(est.horizon / 0.01))

    def test_tail_bound_decreases(self, table1):
        assert tail_bound(table1, 20.0) < tail_bound(table1, 10.0)

    def test_horizon_overflow(self, table1):
        with pytest.raises(HorizonOverflowError):
            estimate_cost(table1, ConstantPolicy(0.0), FAST, eps=1e-300, max_horizon=20)


class TestMoments:
    def test_second_moment_under_surplus(self, table1):
        rep = moment_bound_check(table1, ConstantPolicy(1.0), FAST, m=2, t=2.0)
        assert rep.passed and rep.empirical < rep.bound

    def test_first_moment_driftless(self):
        m = driftless()
        rep = moment_bound_check(m, ConstantPolicy(0.0), FAST, m=1, t=2.0)
        assert rep.passed
        assert abs(rep.empirical - 0.7) < 3 * rep.stderr
        assert lambda_m(m, 1) > 0

    def test_deterministic_extreme_is_tight(self):
        m = constant_model(g0=-0.02, alpha=0.0, sigma=0.0, gbar1=-0.02, gbar2=0.5)
        rep = moment_bound_check(m, ConstantPolicy(-1.0), PathConfig(dt=0.01, horizon=2, n_paths=2), m=2, t=2.0)
        assert rep.passed
        assert rep.empirical == pytest.approx(rep.bound, rel=1e-12)


class TestSustainability:
    def test_maximum_surplus(self, table1):
        rep = sustainability_check(table1, ConstantPolicy(1.0), FAST, [1, 2, 4, 8])
        assert rep.sustainable and rep.monotone

    def test_zero_control_decays_at_growth_rate(self):
        m = constant_model(r=0.05, g0=0.03)
        rep = sustainability_check(m, ConstantPolicy(0.0), PathConfig(dt=0.01, n_paths=4000, seed=2), [2, 4, 6])
        assert rep.slope == pytest.approx(-0.03, abs=0.01)
        assert rep.sustainable

    def test_negative_growth_unsustainable(self):
        m = constant_model(r=0.05, g0=-0.03, gbar1=-1.0, gbar2=1.0)
        rep = sustainability_check(m, ConstantPolicy(0.0), PathConfig(dt=0.01, n_paths=2000, seed=2), [2, 4, 6])
        assert not rep.sustainable

    def test_linear_in_start(self, table1):
        cfg = PathConfig(dt=0.01, n_paths=50, seed=1)
        a = sustainability_check(table1, ConstantPolicy(0.5), cfg, [1, 2], x0=1e-3)
        b = sustainability_check(table1, ConstantPolicy(0.5), cfg, [1, 2], x0=1e-6)
        assert np.allclose(np.array(a.means) / 1e3, b.means, rtol=1e-9)


class TestCovariation:
    def test_constant_rate(self, table1):
        rep = covariation_diagnostic(table1, 0.2, FAST)
        assert rep.covariation == rep.formula == rep.max_abs_gap == 0.0

    def test_affine_formula(self):
        m, cfg = cov_model(1 / 104)
        rep = covariation_diagnostic(m, 0.2, cfg)
        assert rep.formula == pytest.approx(0.03 * 0.05 * 0.01 * 1.0, rel=1e-12)

    def test_gap_halves(self):
        gaps = [covariation_diagnostic(*_swap(cov_model(dt))).max_abs_gap for dt in (1 / 52, 1 / 104, 1 / 208)]
        for a, b in zip(gaps, gaps[1:]):
            assert 1.6 < a / b < 2.5


def _swap(pair):
    model, cfg = pair
    return model, 0.2, cfg
