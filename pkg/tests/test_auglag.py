import numpy as np

from cableteam.auglag import minimize_auglag, minimize_bfgs


def test_bfgs_quadratic_bowl():
    a = np.array([[3.0, 0.4], [0.4, 1.0]])
    b = np.array([1.0, -2.0])

    def fun(x):
        return 0.5 * x @ a @ x - b @ x, a @ x - b

    x, _ = minimize_bfgs(fun, np.zeros(2), gtol=1e-10, max_iter=100)
    assert np.allclose(x, np.linalg.solve(a, b), atol=1e-8)


def test_auglag_unconstrained_reduces_to_bfgs():
    def objective(x):
        return float(np.sum((x - 2.0) ** 2)), 2.0 * (x - 2.0)

    def constraints(x):
        return np.zeros(0), np.zeros((0, x.size))

    res = minimize_auglag(objective, constraints, np.zeros(3))
    assert res.converged
    assert np.allclose(res.x, 2.0, atol=1e-6)


def test_auglag_scalar_bound():
    # min x^2 s.t. x >= 1  ->  x* = 1, multiplier 2
    def objective(x):
        return float(x[0] ** 2), np.array([2.0 * x[0]])

    def constraints(x):
        return np.array([1.0 - x[0]]), np.array([[-1.0]])

    res = minimize_auglag(objective, constraints, np.array([0.0]))
    assert res.converged
    assert abs(res.x[0] - 1.0) < 1e-5
    assert abs(res.multipliers[0] - 2.0) < 1e-3
    assert res.kkt_residual < 1e-4


def test_auglag_projection_onto_circle_exterior():
    # min ||x - a||^2 s.t. ||x||^2 >= 1 with a strictly inside the disc
    a = np.array([0.3, 0.2])

    def objective(x):
        return float(np.sum((x - a) ** 2)), 2.0 * (x - a)

    def constraints(x):
        return np.array([1.0 - x @ x]), (-2.0 * x)[None, :]

    res = minimize_auglag(objective, constraints, np.array([0.5, 0.1]))
    assert res.converged
    assert np.allclose(res.x, a / np.linalg.norm(a), atol=1e-4)
    assert res.max_violation <= 1e-6


def test_auglag_inactive_constraint_keeps_unconstrained_optimum():
    def objective(x):
        return float(np.sum(x ** 2)), 2.0 * x

    def constraints(x):
        # ||x - [5,5]|| >= 1 is inactive at the origin
        d = x - np.array([5.0, 5.0])
        return np.array([1.0 - d @ d]), (-2.0 * d)[None, :]

    res = minimize_auglag(objective, constraints, np.array([0.4, -0.2]))
    assert res.converged
    assert np.allclose(res.x, 0.0, atol=1e-6)
    assert np.allclose(res.multipliers, 0.0, atol=1e-8)
