"""Inequality-constrained minimization via an augmented Lagrangian.

Solves  min f(x)  s.t.  g_i(x) <= 0  with a PHR augmented Lagrangian outer
loop and a BFGS inner minimization (Armijo backtracking). Problem sizes here
are tiny (tens of variables), so dense inverse-Hessian updates are fine.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class AuglagResult:
    x: np.ndarray
    multipliers: np.ndarray
    converged: bool
    iterations: int          # total inner iterations
    outer_iterations: int
    kkt_residual: float      # stationarity of the Lagrangian at the solution
    max_violation: float     # max_i g_i(x), <= 0 when feasible


def minimize_bfgs(fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
                  x0: np.ndarray, gtol: float, max_iter: int) -> tuple[np.ndarray, int]:
    """Quasi-Newton descent on a smooth function returning (value, gradient)."""
    x = np.asarray(x0, dtype=float).copy()
    dim = x.size
    h = np.eye(dim)  # inverse Hessian approximation
    f, g = fun(x)
    iterations = 0
    for _ in range(max_iter):
        if np.max(np.abs(g)) <= gtol:
            break
        d = -h @ g
        if d @ g >= 0.0:  # not a descent direction, reset curvature
            h = np.eye(dim)
            d = -g
        step = 1.0
        f_new, g_new, x_new = f, g, x
        for _ in range(30):
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if f_new <= f + 1e-4 * step * (g @ d):
                break
            step *= 0.5
        else:
            break  # line search failed, give up at current point
        s = x_new - x
        y = g_new - g
        sy = s @ y
        if sy > 1e-12 * max(1.0, np.linalg.norm(s) * np.linalg.norm(y)):
            rho = 1.0 / sy
            v = np.eye(dim) - rho * np.outer(s, y)
            h = v @ h @ v.T + rho * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
        iterations += 1
    return x, iterations


def minimize_auglag(objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
                    constraints: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
                    x0: np.ndarray,
                    tolerance: float = 1e-6,
                    max_outer: int = 25,
                    max_inner: int = 60,
                    penalty: float = 10.0,
                    penalty_growth: float = 10.0,
                    multipliers: np.ndarray | None = None) -> AuglagResult:
    """PHR augmented Lagrangian for g(x) <= 0 constraints.

    ``constraints(x)`` returns the residual vector g (m,) and its Jacobian
    (m, dim). Multipliers may be warm-started from a previous solve.
    """
    x = np.asarray(x0, dtype=float).copy()
    g0, _ = constraints(x)
    m = g0.size
    lam = np.zeros(m) if multipliers is None else np.asarray(multipliers, float).copy()
    rho = penalty
    total_inner = 0
    prev_violation = np.inf
    gtol = max(tolerance, 1e-3)

    for outer in range(1, max_outer + 1):
        def lagrangian(xx):
            f, grad = objective(xx)
            g, jac = constraints(xx)
            active = np.maximum(0.0, lam + rho * g)
            val = f + (np.sum(active ** 2) - np.sum(lam ** 2)) / (2.0 * rho)
            return val, grad + jac.T @ active

        x, inner = minimize_bfgs(lagrangian, x, gtol, max_inner)
        total_inner += inner

        g, jac = constraints(x)
        lam = np.maximum(0.0, lam + rho * g)
        violation = float(np.max(g)) if m else 0.0

        _, grad_f = objective(x)
        kkt = float(np.max(np.abs(grad_f + jac.T @ lam))) if m else \
            float(np.max(np.abs(grad_f)))
        if violation <= tolerance and kkt <= max(tolerance, 1e-4):
            return AuglagResult(x, lam, True, total_inner, outer, kkt,
                                violation)
        if violation > 0.25 * prev_violation:
            rho *= penalty_growth
        prev_violation = max(violation, 0.0)
        gtol = max(tolerance, gtol * 0.2)

    g, jac = constraints(x)
    _, grad_f = objective(x)
    kkt = float(np.max(np.abs(grad_f + jac.T @ lam))) if m else \
        float(np.max(np.abs(grad_f)))
    return AuglagResult(x, lam, False, total_inner, max_outer, kkt,
                        float(np.max(g)) if m else 0.0)
