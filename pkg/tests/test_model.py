import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from debtopt.errors import (
    ConfigError,
    DegenerateError,
    InvalidExponentError,
    ModelValidationError,
    NotApplicableError,
)
from debtopt.model import (
    Affine,
    ControlBounds,
    Economy,
    Factor,
    LinearGrowth,
    PowerCost,
    QuadraticDistanceCost,
    Rate,
    classify_economy,
    constant_model,
    lambda_m,
    model_from_dict,
    model_to_dict,
    sustainability_bounds,
    validate,
    violations,
)


def codes(model):
    return {v.code for v in violations(model)}


def lm_model(R=0.01, gbar1=-0.2, U1=1.0, sigma=0.2):
    return constant_model(r=R, u1=U1, sigma=sigma, gbar1=gbar1, gbar2=0.5)


class TestLambdaM:
    def test_first_moment_drops_volatility(self):
        assert lambda_m(lm_model(), 1) == pytest.approx(1.21, abs=1e-12)

    def test_second_moment(self):
        # 2 * (0.01 + 0.2 + 1) + 2 * 1 * 0.04 / 2
        expected = 2 * 1.21 + 0.04
        assert lambda_m(lm_model(), 2) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(2.46, abs=1e-12)

    def test_zero_volatility(self):
        assert lambda_m(lm_model(sigma=0.0), 2) == pytest.approx(2 * (0.01 + 0.2 + 1.0), abs=1e-12)

    @pytest.mark.parametrize("m", [0.0, -1.0])
    def test_nonpositive_exponent(self, m):
        with pytest.raises(InvalidExponentError):
            lambda_m(lm_model(), m)

    @settings(max_examples=60, deadline=None)
    @given(
        R=st.floats(0.001, 0.2),
        U1=st.floats(0.05, 2.0),
        m=st.floats(1.0, 4.0),
        dR=st.floats(1e-3, 0.1),
        dU=st.floats(1e-3, 0.5),
        dm=st.floats(1e-2, 1.0),
    )
    def test_strictly_increasing(self, R, U1, m, dR, dU, dm):
        base = lambda_m(lm_model(R=R, U1=U1), m)
        assert lambda_m(lm_model(R=R + dR, U1=U1), m) > base
        assert lambda_m(lm_model(R=R, U1=U1 + dU), m) > base
        assert lambda_m(lm_model(R=R, U1=U1), m + dm) > base


class TestValidate:
    def test_reference_parameters_valid(self, table1):
        assert validate(table1) is table1

    def test_lambda_at_boundary_rejected(self, table1):
        lm = lambda_m(table1, 2)
        assert "lambda-too-small" in codes(table1.replace(lam=lm))
        assert "lambda-too-small" not in codes(table1.replace(lam=lm * (1 + 1e-9)))

    def test_zero_deficit_bound(self, table1):
        with pytest.raises(ModelValidationError) as exc:
            validate(table1.replace(bounds=ControlBounds(0.0, 1.0)))
        assert "bounds-nonpositive" in exc.value.codes

    @pytest.mark.parametrize(
        "change, code",
        [
            (dict(sigma=-0.1), "sigma-negative"),
            (dict(rho=1.5), "rho-out-of-range"),
            (dict(x0=0.0), "x0-nonpositive"),
            (dict(lam=-1.0), "lambda-nonpositive"),
            (dict(lam=1.0), "lambda-too-small"),
            (dict(bounds=ControlBounds(1.0, math.inf)), "bounds-nonfinite"),
            (dict(rate=Rate(0.01, 0.1)), "rate-unbounded"),
            (dict(rate=Rate(-0.01)), "rate-nonpositive"),
            (dict(cost=QuadraticDistanceCost(-0.6)), "xbar-negative"),
            (dict(cost=PowerCost(-1.0, 2)), "cost-negative"),
            (dict(cost=PowerCost(1.0, -2)), "cost-exponent"),
            (dict(growth=LinearGrowth(0.03, -0.9)), "alpha-negative"),
            (dict(growth=LinearGrowth(0.03, 0.9, gbar1=-0.1, gbar2=0.5)), "growth-unbounded"),
            (dict(growth=LinearGrowth(0.03, 0.9, gbar1=0.1, gbar2=0.5)), "growth-bounds-sign"),
            (dict(factor=Factor("ou", kappa=-1.0, c=0.1)), "factor-invalid"),
        ],
    )
    def test_single_field_violation(self, table1, change, code):
        found = codes(table1.replace(**change))
        assert code in found

    def test_all_violations_reported_together(self, table1):
        bad = table1.replace(sigma=-0.1, rho=2.0, x0=-1.0)
        with pytest.raises(ModelValidationError) as exc:
            validate(bad)
        assert {"sigma-negative", "rho-out-of-range", "x0-nonpositive"} <= set(exc.value.codes)

    def test_inferred_growth_bounds_straddle_zero(self, table1):
        assert table1.gbar1 == pytest.approx(0.03 - 0.9)
        assert table1.gbar2 == pytest.approx(0.03 + 0.9)

    def test_affine_rate_needs_cap_within_range(self, table1):
        m = table1.replace(rate=Rate(0.02, 0.01, cap=0.05), factor=Factor("ou", kappa=1.0, theta=0.0, c=0.1))
        assert "rate-unbounded" not in codes(m)


class TestEconomy:
    def test_strong(self):
        assert classify_economy(constant_model(r=0.01, g0=0.03, sigma=0.2)) is Economy.STRONG

    def test_weak(self):
        assert classify_economy(constant_model(r=0.07, g0=0.015, sigma=0.3)) is Economy.WEAK

    def test_boundary(self):
        assert classify_economy(constant_model(r=0.03 + 0.02, g0=0.03, sigma=0.2)) is Economy.BOUNDARY

    def test_z_dependent_rejected(self, table1):
        m = table1.replace(rate=Rate(0.02, 0.01, cap=0.05), factor=Factor("ou", kappa=1.0, c=0.1))
        with pytest.raises(NotApplicableError):
            classify_economy(m)

    @settings(max_examples=50, deadline=None)
    @given(r=st.floats(0.001, 0.1), g0=st.floats(0.001, 0.1), sigma=st.floats(0.05, 0.4), k=st.floats(0.1, 12.0))
    def test_time_rescaling_invariance(self, r, g0, sigma, k):
        base = constant_model(r=r, g0=g0, sigma=sigma)
        scaled = constant_model(r=k * r, g0=k * g0, sigma=math.sqrt(k) * sigma, lam=5.0 * k)
        lhs = g0 + sigma**2 / 2
        if math.isclose(lhs, r, rel_tol=1e-9):
            return
        assert classify_economy(base) is classify_economy(scaled)


class TestSustainabilityBounds:
    def test_reference_orientation(self, table1):
        sb = sustainability_bounds(table1)
        assert sb.deficit_sustainable is False  # 0.1 > 0.03
        assert sb.surplus_sustainable is True  # -0.1 < 0.03
        assert sb.surplus_threshold == pytest.approx(-0.03 / 0.1)
        assert sb.deficit_threshold == pytest.approx(0.03 / 0.1)

    def test_small_deficit_bound_sustainable(self):
        assert sustainability_bounds(constant_model(u1=1e-3, u2=1.0)).deficit_sustainable

    def test_unit_alpha(self):
        with pytest.raises(DegenerateError):
            sustainability_bounds(constant_model(alpha=1.0))


class TestJson:
    def test_round_trip(self, table1):
        doc = model_to_dict(table1)
        again = model_from_dict(doc)
        assert model_to_dict(again) == doc
        assert again.lam == table1.lam and again.cost == table1.cost

    def test_affine_round_trip(self, table1):
        m = table1.replace(
            rate=Rate(0.02, 0.01, cap=0.05),
            growth=LinearGrowth(Affine(0.03, 0.01, -0.1, 0.1), 0.9, gbar1=-1.0, gbar2=1.0),
            factor=Factor("ou", kappa=1.0, theta=0.1, c=0.2),
        )
        assert model_to_dict(model_from_dict(model_to_dict(m))) == model_to_dict(m)

    def test_unknown_key_rejected(self, table1):
        doc = model_to_dict(table1)
        doc["growth"]["gamma"] = 1.0
        with pytest.raises(ConfigError, match="gamma"):
            model_from_dict(doc)

    def test_unknown_family_rejected(self, table1):
        doc = model_to_dict(table1)
        doc["rate"] = {"family": "cubic"}
        with pytest.raises(ConfigError):
            model_from_dict(doc)


def test_growth_lattice_covers_control_range(table1):
    us = table1.u_lattice
    assert us[0] == -table1.bounds.u1 and us[-1] == table1.bounds.u2
    assert np.all(np.diff(us) > 0)
