"""Tension allocation: minimum-norm wrench distribution plus null-space safety.

The 6 x 3n map P sends stacked per-cable tension vectors (forces the cables
apply to the payload, world frame) to the payload wrench. All safety action
happens inside the null space of P, so the commanded payload wrench is never
perturbed. Two safety variants: a gradient ascent on robot-to-object distance
(projected into the null space) and a constrained minimization over
null-space coordinates with hard clearance constraints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .auglag import minimize_auglag
from .so3 import hat, nullspace_basis, pinv_full_row

EPS_TENSION = 1e-6


class DegenerateTension(ValueError):
    """A combined tension vector shrank below the unit-direction guard."""


@dataclass
class AllocationGeometry:
    """Attach layout snapshot used by one allocation call."""

    rhos: np.ndarray          # (n,3) payload frame
    rot: np.ndarray           # payload orientation
    attach_world: np.ndarray  # (n,3) world frame
    lengths: np.ndarray       # (n,)

    @classmethod
    def build(cls, rhos, rot, payload_pos, lengths) -> "AllocationGeometry":
        rhos = np.asarray(rhos, dtype=float)
        rot = np.asarray(rot, dtype=float)
        attach = np.asarray(payload_pos, dtype=float) + rhos @ rot.T
        return cls(rhos, rot, attach, np.asarray(lengths, dtype=float))

    @property
    def n(self) -> int:
        return self.rhos.shape[0]


def build_p(geometry: AllocationGeometry) -> np.ndarray:
    """Assemble the 6 x 3n tension map: identity blocks over hat(rho_k) R^T."""
    n = geometry.n
    p = np.zeros((6, 3 * n))
    rt = geometry.rot.T
    for k in range(n):
        p[0:3, 3 * k:3 * k + 3] = np.eye(3)
        p[3:6, 3 * k:3 * k + 3] = hat(geometry.rhos[k]) @ rt
    return p


def distribute_min_norm(p: np.ndarray, wrench: np.ndarray) -> np.ndarray:
    """Minimum-norm tension set realizing the wrench: mu = P^+ w."""
    return pinv_full_row(p) @ np.asarray(wrench, dtype=float)


def project_nullspace(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto the null space of P, v = (I - P^+ P) g."""
    pinv = pinv_full_row(p)
    return g - pinv @ (p @ g)


def kinematic_positions(mu: np.ndarray, geometry: AllocationGeometry,
                        floor: float = EPS_TENSION) -> np.ndarray:
    """Robot positions implied by taut cables opposing the tension set.

    x_k = p_att,k + l_k (mu_k) / ||mu_k|| with the tension vector in the
    payload-force convention, so the unit vector points from the attach point
    toward the robot.
    """
    w = mu.reshape(-1, 3)
    norms = np.maximum(np.linalg.norm(w, axis=1), floor)
    return geometry.attach_world + geometry.lengths[:, None] * w / norms[:, None]


def distance_cost(mu_plus_v: np.ndarray, geometry: AllocationGeometry,
                  p_object: np.ndarray) -> float:
    """Sum of squared robot-to-object distances at the kinematic positions."""
    positions = kinematic_positions(mu_plus_v, geometry)
    return float(np.sum((positions - p_object) ** 2))


def distance_cost_gradient(mu_plus_v: np.ndarray, geometry: AllocationGeometry,
                           p_object: np.ndarray) -> np.ndarray:
    """Analytic gradient of :func:`distance_cost` with respect to the modifier.

    Per robot: -2 l_k (I - u u^T)(p_object - p_att,k) / ||mu_k + v_k||.
    """
    n = geometry.n
    w = mu_plus_v.reshape(n, 3)
    norms = np.linalg.norm(w, axis=1)
    if np.any(norms <= EPS_TENSION):
        raise DegenerateTension("combined tension below unit-direction guard")
    units = w / norms[:, None]
    rel = p_object - geometry.attach_world
    rad = np.sum(units * rel, axis=1)[:, None] * units
    grad = -2.0 * geometry.lengths[:, None] * (rel - rad) / norms[:, None]
    return grad.ravel()


@dataclass
class SafetyParams:
    mode: str = "off"             # off | gradient | optimization
    gain: float = 1.0             # a in the exponential distance weight
    decay: float = 3.0            # b in the exponential distance weight
    human_radius: float = 1.0     # m
    robot_radius: float = 0.75    # m
    max_iterations: int = 40
    tolerance: float = 1e-6
    penalty_growth: float = 10.0
    max_tension: float = 5.0      # per-robot actuator sanity bound, warn only

    def __post_init__(self):
        if self.mode not in ("off", "gradient", "optimization"):
            raise ValueError(f"unknown safety mode {self.mode!r}")
        if self.gain <= 0.0 or self.decay <= 0.0:
            raise ValueError("gain and decay must be positive")
        if self.human_radius <= 0.0 or self.robot_radius <= 0.0:
            raise ValueError("clearance radii must be positive")


@dataclass
class AllocationDiagnostics:
    nullspace_residual: float = 0.0   # ||P (mu_des - mu_bar)||
    objective: float = 0.0            # ||mu_des||^2
    min_human_distance: float = np.inf    # kinematic, m
    min_robot_distance: float = np.inf    # kinematic, m
    degenerate: bool = False
    infeasible: bool = False
    converged: bool = True
    iterations: int = 0
    tension_bound_exceeded: bool = False


@dataclass
class AllocationResult:
    mu_des: np.ndarray   # (3n,)
    mu_bar: np.ndarray   # (3n,) minimum-norm part
    diagnostics: AllocationDiagnostics


class SafetyAllocator:
    """Stateful allocator: persists the gradient modifier and warm starts."""

    def __init__(self, params: SafetyParams):
        self.params = params
        self._v: np.ndarray | None = None        # gradient-mode modifier
        self._c: np.ndarray | None = None        # optimization warm start
        self._c_feasible: np.ndarray | None = None
        self._multipliers: np.ndarray | None = None

    def reset(self) -> None:
        self._v = None
        self._c = None
        self._c_feasible = None
        self._multipliers = None

    def allocate(self, wrench: np.ndarray, geometry: AllocationGeometry,
                 p_object: np.ndarray | None) -> AllocationResult:
        p = build_p(geometry)
        mu_bar = distribute_min_norm(p, wrench)
        diag = AllocationDiagnostics()

        mode = self.params.mode if p_object is not None else "off"
        if mode == "off":
            mu_des = mu_bar
        elif mode == "gradient":
            v, tripped = self._gradient_modifier(mu_bar, p, geometry, p_object)
            diag.degenerate = tripped
            mu_des = mu_bar + v
        else:
            mu_des, opt_diag = self._optimize_modifier(mu_bar, p, geometry,
                                                       p_object)
            diag.infeasible = opt_diag["infeasible"]
            diag.converged = opt_diag["converged"]
            diag.iterations = opt_diag["iterations"]

        diag.nullspace_residual = float(np.linalg.norm(p @ (mu_des - mu_bar)))
        diag.objective = float(mu_des @ mu_des)
        positions = kinematic_positions(mu_des, geometry)
        if p_object is not None:
            diag.min_human_distance = float(
                np.min(np.linalg.norm(positions - p_object, axis=1)))
        if geometry.n >= 2:
            dists = np.linalg.norm(
                positions[:, None, :] - positions[None, :, :], axis=2)
            iu = np.triu_indices(geometry.n, 1)
            diag.min_robot_distance = float(np.min(dists[iu]))
        per_robot = np.linalg.norm(mu_des.reshape(-1, 3), axis=1)
        diag.tension_bound_exceeded = bool(np.any(per_robot > self.params.max_tension))
        return AllocationResult(mu_des, mu_bar, diag)

    # -- gradient variant ---------------------------------------------------

    def _gradient_modifier(self, mu_bar, p, geometry, p_object):
        n = geometry.n
        v_prev = self._v if self._v is not None and self._v.size == mu_bar.size \
            else np.zeros_like(mu_bar)
        combined = mu_bar + v_prev
        try:
            grad = distance_cost_gradient(combined, geometry, p_object)
        except DegenerateTension:
            # unit direction undefined: keep the previous modifier, re-projected
            # onto the current null space, and flag the event
            v = project_nullspace(p, v_prev)
            self._v = v
            return v, True
        positions = kinematic_positions(combined, geometry)
        dists = np.linalg.norm(positions - p_object, axis=1)
        weights = self.params.gain * np.exp(-self.params.decay * dists)
        g_tilde = v_prev + (weights[:, None] * grad.reshape(n, 3)).ravel()
        v = project_nullspace(p, g_tilde)
        self._v = v
        return v, False

    # -- optimization variant -----------------------------------------------

    def _optimize_modifier(self, mu_bar, p, geometry, p_object):
        n = geometry.n
        g_basis = nullspace_basis(p)          # (3n, 3n-6)
        dim = g_basis.shape[1]
        mu_blocks = mu_bar.reshape(n, 3)
        g_blocks = g_basis.reshape(n, 3, dim)
        lengths = geometry.lengths
        attach = geometry.attach_world
        pairs = np.array(np.triu_indices(n, 1)).T
        r_h2 = self.params.human_radius ** 2
        r_r2 = self.params.robot_radius ** 2

        def positions_and_jac(c):
            w = mu_blocks + g_blocks @ c                 # (n,3)
            norms = np.maximum(np.linalg.norm(w, axis=1), EPS_TENSION)
            units = w / norms[:, None]
            x = attach + lengths[:, None] * units
            # dx_k/dc = l_k (I - u u^T) G_k / ||w_k||
            proj = np.eye(3) - units[:, :, None] * units[:, None, :]
            jac = (lengths / norms)[:, None, None] * (proj @ g_blocks)
            return x, jac

        def objective(c):
            w = mu_bar + g_basis @ c
            return float(w @ w), 2.0 * (g_basis.T @ w)

        def constraints(c):
            x, jac = positions_and_jac(c)
            g_h = r_h2 - np.sum((p_object - x) ** 2, axis=1)
            jac_h = 2.0 * np.einsum("ki,kij->kj", p_object - x, jac)
            d = x[pairs[:, 0]] - x[pairs[:, 1]]
            g_r = r_r2 - np.sum(d ** 2, axis=1)
            jac_r = -2.0 * np.einsum(
                "ki,kij->kj", d, jac[pairs[:, 0]] - jac[pairs[:, 1]])
            return np.concatenate([g_h, g_r]), np.vstack([jac_h, jac_r])

        c0 = self._c if self._c is not None and self._c.size == dim \
            else np.zeros(dim)
        lam0 = self._multipliers \
            if self._multipliers is not None \
            and self._multipliers.size == n + len(pairs) else None
        result = minimize_auglag(
            objective, constraints, c0,
            tolerance=self.params.tolerance,
            max_outer=self.params.max_iterations,
            penalty_growth=self.params.penalty_growth,
            multipliers=lam0)

        info = {"infeasible": False, "converged": result.converged,
                "iterations": result.iterations}
        c = result.x
        # worst clearance violation converted from squared units to meters
        x, _ = positions_and_jac(c)
        human_short = self.params.human_radius - np.min(
            np.linalg.norm(x - p_object, axis=1))
        robot_short = 0.0
        if len(pairs):
            robot_short = self.params.robot_radius - np.min(
                np.linalg.norm(x[pairs[:, 0]] - x[pairs[:, 1]], axis=1))
        if max(human_short, robot_short) > 1e-4:
            info["infeasible"] = True
            if self._c_feasible is not None:
                c = self._c_feasible
        else:
            self._c_feasible = c.copy()
        self._c = c.copy()
        self._multipliers = result.multipliers
        return mu_bar + g_basis @ c, info
