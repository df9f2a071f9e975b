import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from debtopt.errors import ControlViolationError, DomainError, NonConvexHamiltonianError, NotApplicableError
from debtopt.model import (
    Affine,
    ConcaveQuadraticGrowth,
    ControlBounds,
    Factor,
    LinearGrowth,
    PowerCost,
    QuadraticDistanceCost,
    Rate,
    constant_model,
)
from debtopt.policy import (
    CONCAVE_ENDPOINT,
    CONVEX_BISECTION,
    GRID_SEARCH,
    INTERIOR_MATCHING,
    LINEAR_ENDPOINT,
    ConstantPolicy,
    StateFeedback,
    ThresholdBangBang,
    ValueGradient,
    ZFeedback,
    dH_du,
    grid_search_argmin,
    hamiltonian,
    interior_candidate,
    minimize_hamiltonian,
    policy_from_dict,
    reduction_policy_z,
)

US = np.linspace(-1.0, 1.0, 10_000)


class TestHamiltonian:
    def test_zero_gradient_leaves_cost(self, table1):
        h = hamiltonian(table1, 0.0, 0.8, 0.0, US)
        assert np.allclose(h, (0.8 - 0.6) ** 2)

    def test_linear_slope_matches_finite_difference(self, table1):
        x, vx = 0.8, 0.37
        expected = -x * vx * (1 - 0.9)
        h = lambda u: hamiltonian(table1, vx, x, 0.0, u)  # noqa: E731
        fd = (h(0.3 + 1e-6) - h(0.3 - 1e-6)) / 2e-6
        assert fd == pytest.approx(expected, rel=1e-7)
        assert dH_du(table1, vx, x, 0.0, 0.3) == pytest.approx(expected, rel=1e-12)

    def test_constant_when_drift_ignores_control(self):
        m = constant_model(alpha=1.0)
        h = hamiltonian(m, 0.5, 0.7, 0.0, US)
        assert np.ptp(h) < 1e-15

    def test_domain(self, table1):
        with pytest.raises(DomainError):
            hamiltonian(table1, 1.0, 0.0, 0.0, 0.1)

    def test_accepts_value_gradient(self, table1):
        vg = ValueGradient(lambda x, z: 2 * x, "closed-form")
        assert hamiltonian(table1, vg, 0.5, 0.0, 0.2) == pytest.approx(hamiltonian(table1, 1.0, 0.5, 0.0, 0.2))


class TestLinearEndpoint:
    def test_surplus_when_alpha_below_one(self, table1):
        mn = minimize_hamiltonian(table1, 1.0, 0.8)
        assert mn.u == 1.0 and mn.regime == LINEAR_ENDPOINT

    def test_deficit_when_alpha_above_one(self):
        assert minimize_hamiltonian(constant_model(alpha=1.1), 1.0, 0.8).u == -1.0

    def test_tie_goes_to_deficit(self, table1):
        assert minimize_hamiltonian(table1, 0.0, 0.8).u == -1.0

    @settings(max_examples=80, deadline=None)
    @given(vx=st.floats(-10, 10).filter(lambda v: v != 0), k=st.floats(1e-3, 1e3), x=st.floats(0.01, 5))
    def test_positive_rescaling_invariant(self, vx, k, x):
        m = constant_model()
        assert minimize_hamiltonian(m, vx, x).u == minimize_hamiltonian(m, k * vx, x).u

    def test_vectorized_shapes(self, table1):
        x = np.linspace(0.1, 2, 7)
        mn = minimize_hamiltonian(table1, np.where(x > 0.6, 1.0, -1.0), x)
        assert mn.u.shape == (7,)
        assert np.array_equal(mn.u, np.where(x > 0.6, 1.0, -1.0))


def quad_model(alpha=0.5, beta=0.25, u1=1.0, u2=1.0, penalty=0.0):
    return constant_model(alpha=alpha, beta=beta, u1=u1, u2=u2, cost=PowerCost(1.0, 2, penalty))


class TestInterior:
    def test_interior_candidate_value(self):
        assert interior_candidate(quad_model(), 0.0).u == pytest.approx(1.0)

    def test_unit_alpha_gives_zero(self):
        assert interior_candidate(quad_model(alpha=1.0, beta=0.7)).u == 0.0

    def test_clamped_above(self):
        cand = interior_candidate(quad_model(alpha=0.2, beta=0.1))
        assert cand.u is None and cand.endpoint == 1.0
        u, _ = grid_search_argmin(quad_model(alpha=0.2, beta=0.1), 1.0, 0.7)
        assert u == pytest.approx(1.0)

    def test_linear_family_not_applicable(self, table1):
        with pytest.raises(NotApplicableError):
            interior_candidate(table1)

    def test_minimizer_matches_matching_condition(self):
        m = quad_model(alpha=0.6, beta=0.5)
        mn = minimize_hamiltonian(m, 2.0, 0.9)
        assert mn.regime == INTERIOR_MATCHING
        assert mn.u == pytest.approx(0.4)
        u_grid, _ = grid_search_argmin(m, 2.0, 0.9)
        assert abs(u_grid - 0.4) < 2.5e-4

    @settings(max_examples=40, deadline=None)
    @given(x1=st.floats(0.01, 5), x2=st.floats(0.01, 5), vx=st.floats(1e-3, 10))
    def test_independent_of_x(self, x1, x2, vx):
        m = quad_model(alpha=0.6, beta=0.5)
        assert minimize_hamiltonian(m, vx, x1).u == minimize_hamiltonian(m, vx, x2).u


class TestConvexAndConcave:
    def test_bisection_regime_tolerance(self):
        m = constant_model(cost=QuadraticDistanceCost(0.6, control_penalty=0.5))
        mn = minimize_hamiltonian(m, 1.3, 0.9)
        assert mn.regime == CONVEX_BISECTION
        assert abs(dH_du(m, 1.3, 0.9, 0.0, mn.u)) < 1e-8 * (1 + 0.9 * 1.3)
        # closed form: 2 p u - x vx (1 - alpha) = 0
        assert mn.u == pytest.approx(0.9 * 1.3 * 0.1 / (2 * 0.5), abs=1e-10)

    def test_concave_uses_endpoints(self):
        m = quad_model()
        mn = minimize_hamiltonian(m, -1.0, 0.9)
        assert mn.regime == CONCAVE_ENDPOINT
        u_grid, _ = grid_search_argmin(m, -1.0, 0.9)
        assert mn.u == u_grid

    def test_mixed_curvature_needs_flag(self):
        # the shipped families never mix curvature signs, so the cost is patched
        m = quad_model()
        with pytest.raises(NonConvexHamiltonianError):
            minimize_hamiltonian(_MixedModel(m), 1.0, 0.9)
        mn = minimize_hamiltonian(_MixedModel(m), 1.0, 0.9, grid_fallback=True)
        assert mn.regime == GRID_SEARCH


class _MixedCost(PowerCost):
    def duu(self, x, z, u):
        return -np.asarray(u, dtype=float) * 10.0


class _MixedModel:
    """Model proxy whose cost curvature changes sign across the control interval."""

    def __init__(self, base):
        self._base = base
        self.cost = _MixedCost(PowerCost(1.0, 2).C, 2, 0.5)

    def __getattr__(self, name):
        return getattr(self._base, name)

    def f(self, x, z, u):
        return self.cost(x, z, u)


@pytest.mark.parametrize("regime", ["linear", "interior", "convex"])
def test_argmin_oracle(regime):
    rng = np.random.default_rng(2024)
    for _ in range(70):
        m, vx, x, z = random_instance(rng, regime)
        mn = minimize_hamiltonian(m, vx, x, z)
        h_star = float(hamiltonian(m, vx, x, z, mn.u))
        _, h_grid = grid_search_argmin(m, vx, x, z)
        assert h_star <= h_grid + 1e-9
        assert -m.bounds.u1 <= mn.u <= m.bounds.u2


class TestReductionPolicy:
    def test_alpha_above_one_gives_deficit(self):
        m = constant_model(alpha=1.3, cost=PowerCost(1.0, 2))
        pol = reduction_policy_z(m)
        assert set(pol.values) == {-1.0}

    def test_interior_branch_matches_grid(self):
        m = quad_model(alpha=0.6, beta=0.5)
        pol = reduction_policy_z(m)
        u = pol(0.7, 0.0)
        assert u == pytest.approx(0.4)
        u_grid, _ = grid_search_argmin(m, 1.0, 0.7)
        assert abs(u - u_grid) < 2.5e-4

    def test_vanishing_curvature_gives_surplus(self):
        m = quad_model(alpha=0.5, beta=1e-6)
        assert reduction_policy_z(m)(1.0, 0.0) == 1.0

    def test_z_dependent_branches(self):
        m = constant_model(alpha=0.5, beta=0.25, cost=PowerCost(1.0, 2)).replace(
            growth=ConcaveQuadraticGrowth(Affine(0.03), Affine(0.5, 0.5, 0.0, 3.0), Affine(0.25), -5.0, 5.0),
            factor=Factor("ou", kappa=1.0, theta=0.0, c=0.5),
            rate=Rate(0.01),
        )
        zs = np.linspace(-2, 2, 9)
        pol = reduction_policy_z(m, z_grid=zs)
        for z in zs:
            u_grid, _ = grid_search_argmin(m, 1.0, 0.7, z)
            assert abs(pol(0.7, z) - u_grid) < 2.5e-4

    def test_requires_assertion(self, table1):
        with pytest.raises(NotApplicableError):
            reduction_policy_z(table1, gradient_positive=False)


class TestPolicyRules:
    def test_threshold_right_closed(self):
        p = ThresholdBangBang(0.6, -1.0, 1.0)
        assert p(0.6) == 1.0 and p(np.nextafter(0.6, 0)) == -1.0

    def test_constant_broadcasts(self):
        assert ConstantPolicy(0.2)(np.ones(3), np.zeros(3)).tolist() == [0.2] * 3

    def test_state_feedback_nearest_node(self):
        p = StateFeedback((0.0, 1.0), (0.0,), ((-1.0,), (1.0,)))
        assert p(0.49, 0.0) == -1.0 and p(0.51, 0.0) == 1.0

    def test_z_feedback_interpolates(self):
        p = ZFeedback((0.0, 1.0), (0.0, 1.0))
        assert p(1.0, 0.25) == pytest.approx(0.25)

    def test_bounds_check(self):
        with pytest.raises(ControlViolationError):
            ConstantPolicy(2.0).check(ControlBounds(1.0, 1.0))

    @pytest.mark.parametrize(
        "pol",
        [
            ConstantPolicy(0.3),
            ThresholdBangBang(0.6, -1.0, 1.0),
            ZFeedback((0.0, 1.0), (0.1, 0.2)),
            StateFeedback((0.0, 1.0), (0.0,), ((-1.0,), (1.0,))),
        ],
    )
    def test_dict_round_trip(self, pol):
        assert policy_from_dict(pol.to_dict()) == pol
