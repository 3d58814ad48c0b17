"""Newton solver for the epsilon-insensitive ranking regression.

The pooled descriptor of a sequence with frames v_1..v_J is

    u* = argmin_u  0.5*||u||^2 + 0.5*c * sum_t max(|u.v_t - t| - eps, 0)^2

with raw frame indices t = 1..J as regression targets. The objective is
convex and piecewise quadratic with a continuous gradient, so a damped
Newton iteration using the piecewise Hessian I + c * sum(active) v_t v_t^T
terminates in a handful of steps: once the active set settles, one full
step lands on the exact minimizer of the local quadratic.

The shrunk residual e_t is r_t - eps for r_t > eps, r_t + eps for
r_t < -eps, and 0 inside the tube (boundary points count as inactive;
the one-sided derivative there is 0). Frames with e_t != 0 form the
active set used by both the gradient and the Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverDidNotConverge

_ARMIJO = 1e-4
_MIN_STEP = 1e-20


@dataclass
class SvrConfig:
    """Constants of the ranking regression and its solver."""

    c: float = 1.0
    epsilon: float = 0.1
    tol: float = 1e-8
    max_iter: int = 200

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")


def ranking_targets(n_frames: int) -> np.ndarray:
    return np.arange(1, n_frames + 1, dtype=float)


def shrunk_residuals(scores: np.ndarray, targets: np.ndarray, epsilon: float) -> np.ndarray:
    r = scores - targets
    return np.where(r > epsilon, r - epsilon, np.where(r < -epsilon, r + epsilon, 0.0))


def objective_value(v: np.ndarray, u: np.ndarray, cfg: SvrConfig) -> float:
    e = shrunk_residuals(v @ u, ranking_targets(v.shape[0]), cfg.epsilon)
    return 0.5 * float(u @ u) + 0.5 * cfg.c * float(e @ e)


def objective_gradient(v: np.ndarray, u: np.ndarray, cfg: SvrConfig) -> np.ndarray:
    e = shrunk_residuals(v @ u, ranking_targets(v.shape[0]), cfg.epsilon)
    return u + cfg.c * (v.T @ e)


def solve(v: np.ndarray, cfg: SvrConfig):
    """Minimize the ranking objective for a (J, D) frame matrix.

    Returns (u, objective, grad_norm, residuals, active, iterations).
    Raises SolverDidNotConverge, with the best iterate attached, if the
    gradient norm is still above cfg.tol after cfg.max_iter steps.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n, d = v.shape
    targets = ranking_targets(n)
    u = np.zeros(d)
    e = shrunk_residuals(v @ u, targets, cfg.epsilon)
    f = 0.5 * float(u @ u) + 0.5 * cfg.c * float(e @ e)
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        grad = u + cfg.c * (v.T @ e)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= cfg.tol:
            return u, f, grad_norm, e, e != 0.0, iterations - 1
        active = e != 0.0
        va = v[active]
        hess = np.eye(d) + cfg.c * (va.T @ va)
        step_dir = -np.linalg.solve(hess, grad)
        slope = float(grad @ step_dir)
        step = 1.0
        while step > _MIN_STEP:
            u_next = u + step * step_dir
            e_next = shrunk_residuals(v @ u_next, targets, cfg.epsilon)
            f_next = 0.5 * float(u_next @ u_next) + 0.5 * cfg.c * float(e_next @ e_next)
            if f_next <= f + _ARMIJO * step * slope:
                break
            step *= 0.5
        u, e, f = u_next, e_next, f_next
    grad = u + cfg.c * (v.T @ e)
    grad_norm = float(np.linalg.norm(grad))
    if grad_norm <= cfg.tol:
        return u, f, grad_norm, e, e != 0.0, iterations
    raise SolverDidNotConverge(
        f"gradient norm {grad_norm:.3e} above {cfg.tol:.1e} after {cfg.max_iter} iterations",
        solution=u, grad_norm=grad_norm)
