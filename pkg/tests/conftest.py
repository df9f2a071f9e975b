import math

import numpy as np
import pytest
from scipy.optimize import fsolve

from debtopt.model import PowerCost, QuadraticDistanceCost, constant_model

STRONG = dict(r=0.01, g0=0.03, sigma=0.2)
WEAK = dict(r=0.07, g0=0.015, sigma=0.3)
TABLE2_CASES = [(0.9, 1.0), (0.95, 1.0), (0.9, 0.8), (0.9, 0.5)]
TABLE2_SETS = [(eco, a, u) for eco in ("strong", "weak") for a, u in TABLE2_CASES]


def table2_model(eco, alpha, U):
    return constant_model(alpha=alpha, u1=U, **(STRONG if eco == "strong" else WEAK))


@pytest.fixture
def table1():
    return constant_model()


@pytest.fixture
def weak():
    return constant_model(**WEAK)


def char_roots(G, r, sigma, lam):
    """Roots of (sigma^2/2) g (g - 1) + (G + r) g - lam via numpy's companion matrix."""
    s2 = 0.5 * sigma**2
    roots = np.sort(np.roots([s2, (G + r) - s2, -lam]).real)
    return roots[0], roots[1]


def pasting_oracle(r, g0, alpha, sigma, lam, U, xbar, guess=0.6):
    """Independent C^2 pasting solve: unknowns (d1, d2, x) from value/slope/curvature continuity."""
    G1 = -(g0 + abs(1 - alpha) * U)
    G2 = -(g0 - abs(1 - alpha) * U)
    a = [1 / (lam - 2 * (G + r) - sigma**2) for G in (G1, G2)]
    b = [2 * xbar / (G + r - lam) for G in (G1, G2)]
    g1 = char_roots(G1, r, sigma, lam)[0]
    g2 = char_roots(G2, r, sigma, lam)[1]

    def branch(x, i, d, g):
        return (
            a[i] * x * x + b[i] * x + d * x**g,
            2 * a[i] * x + b[i] + d * g * x ** (g - 1),
            2 * a[i] + d * g * (g - 1) * x ** (g - 2),
        )

    def eqs(p):
        d1, d2, x = p
        u = branch(x, 0, d1 * 1e-6, g1)
        l = branch(x, 1, d2, g2)
        return [u[0] - l[0], u[1] - l[1], u[2] - l[2]]

    sol = fsolve(eqs, [-0.3, -0.4, guess], xtol=1e-13)
    assert max(abs(e) for e in eqs(sol)) < 1e-12
    d1, d2, x = sol
    return dict(threshold=x, d1=d1 * 1e-6, d2=d2, gamma1=g1, gamma2=g2, a=a, b=b, G1=G1, G2=G2,
                slope=branch(x, 0, d1 * 1e-6, g1)[1])


def gbm_cost(x, xbar, lam, mu, sigma):
    """Discounted (X - xbar)^2 over an infinite horizon for a GBM: integrate E X_t, E X_t^2."""
    return x * x / (lam - 2 * mu - sigma**2) - 2 * xbar * x / (lam - mu) + xbar**2 / lam


def close(a, b, tol):
    return math.isclose(a, b, rel_tol=0, abs_tol=tol)


def random_instance(rng, regime):
    x = float(rng.uniform(0.05, 3))
    z = 0.0
    vx = float(rng.uniform(-5, 5))
    u1, u2 = rng.uniform(0.2, 1.5, size=2)
    alpha = float(rng.uniform(0.1, 2.0))
    if regime == "linear":
        m = constant_model(alpha=alpha, u1=u1, u2=u2)
    elif regime == "interior":
        beta = float(rng.uniform(0.05, 2.0))
        m = constant_model(alpha=alpha, beta=beta, u1=u1, u2=u2, cost=PowerCost(1.0, 2))
        vx = abs(vx) + 1e-3
    else:
        pen = float(rng.uniform(0.05, 2.0))
        if rng.uniform() < 0.5:
            m = constant_model(alpha=alpha, u1=u1, u2=u2, cost=QuadraticDistanceCost(0.6, pen))
        else:
            beta = float(rng.uniform(0.05, 1.0))
            m = constant_model(alpha=alpha, beta=beta, u1=u1, u2=u2, cost=PowerCost(1.0, 2, pen))
            vx = abs(vx)
    return m, vx, x, z
