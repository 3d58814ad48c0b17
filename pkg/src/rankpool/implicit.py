"""Differentiating through the rank-pool argmin.

At a minimizer u of the ranking objective the gradient vanishes:

    u + c * sum_t e_t v_t = 0          (sum over active frames)

Implicit differentiation of this stationarity condition gives, for any
scalar parameter theta the frames depend on,

    du/dtheta = -H^{-1} * c * sum_t (e_t vdot_t + (u . vdot_t) v_t)

with H = I + c * sum_t v_t v_t^T over the active set, vdot_t = dv_t/dtheta,
and the active set frozen at the solution. The reverse-mode forms below
(per-frame input gradients, gradients for a square frame transform W) are
contractions of the same expression. H is symmetric positive definite, so
every mode of HessianFactor applies a true inverse; the diagonal mode is
the cheap approximation that keeps only diag(H).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateUpdate, NotConverged
from .maps import MapKind, map_forward, map_vjp
from .solver import SvrConfig, ranking_targets, shrunk_residuals

DENSE_DIM_LIMIT = 256


@dataclass
class ActiveSet:
    """Shrunk residuals e_t and the mask of frames outside the tube."""

    residuals: np.ndarray
    active: np.ndarray

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.active))


def active_set(v: np.ndarray, u: np.ndarray, cfg: SvrConfig) -> ActiveSet:
    v = np.atleast_2d(np.asarray(v, dtype=float))
    e = shrunk_residuals(v @ u, ranking_targets(v.shape[0]), cfg.epsilon)
    return ActiveSet(residuals=e, active=e != 0.0)


class HessianFactor:
    """Applies H^{-1} for H = I + c * sum(active) v_t v_t^T.

    mode 'dense' solves against the explicit matrix, 'sherman-morrison'
    maintains the inverse through rank-one updates (one per active frame),
    'diagonal' keeps only the diagonal. 'auto' picks dense up to
    DENSE_DIM_LIMIT components and the update chain above that; the
    diagonal approximation is never chosen implicitly.
    """

    def __init__(self, v: np.ndarray, active: np.ndarray, c: float, mode: str = "auto"):
        v = np.atleast_2d(np.asarray(v, dtype=float))
        d = v.shape[1]
        if mode == "auto":
            mode = "dense" if d <= DENSE_DIM_LIMIT else "sherman-morrison"
        self.mode = mode
        self.dim = d
        va = v[np.asarray(active, dtype=bool)]
        if mode == "dense":
            self._matrix = np.eye(d) + c * (va.T @ va)
        elif mode == "diagonal":
            self._diag = 1.0 + c * np.sum(va * va, axis=0) if va.size else np.ones(d)
        elif mode == "sherman-morrison":
            inv = np.eye(d)
            for row in va:
                update = c * row
                inv_u = inv @ update
                denom = 1.0 + float(row @ inv_u)
                if abs(denom) <= 1e-12:
                    raise DegenerateUpdate(f"update denominator {denom:.3e} too close to zero")
                inv -= np.outer(inv_u, row @ inv) / denom
            self._inverse = inv
        else:
            raise ValueError(f"unknown factor mode {mode!r}")

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Return H^{-1} b for a vector or a stack of columns."""
        b = np.asarray(b, dtype=float)
        if self.mode == "dense":
            return np.linalg.solve(self._matrix, b)
        if self.mode == "diagonal":
            return (b.T / self._diag).T if b.ndim > 1 else b / self._diag
        return self._inverse @ b

    def inverse_matrix(self) -> np.ndarray:
        return self.solve(np.eye(self.dim))


def hessian(v: np.ndarray, u: np.ndarray, cfg: SvrConfig, mode: str = "auto") -> HessianFactor:
    """Factor of the objective's piecewise Hessian at u."""
    return HessianFactor(v, active_set(v, u, cfg).active, cfg.c, mode=mode)


def _check_stationary(v: np.ndarray, u: np.ndarray, cfg: SvrConfig) -> ActiveSet:
    aset = active_set(v, u, cfg)
    grad = u + cfg.c * (v.T @ aset.residuals)
    grad_norm = float(np.linalg.norm(grad))
    if grad_norm > cfg.tol:
        raise NotConverged(
            f"solution gradient norm {grad_norm:.3e} exceeds tolerance {cfg.tol:.1e}")
    return aset


def grad_wrt_scalar_param(v: np.ndarray, u: np.ndarray, dv_dtheta: np.ndarray,
                          cfg: SvrConfig, mode: str = "auto") -> np.ndarray:
    """du/dtheta when every frame moves along dv_dtheta as theta varies."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    u = np.asarray(u, dtype=float)
    dv = np.atleast_2d(np.asarray(dv_dtheta, dtype=float))
    aset = _check_stationary(v, u, cfg)
    mask = aset.active
    if not mask.any():
        return np.zeros_like(u)
    e = aset.residuals[mask]
    va, dva = v[mask], dv[mask]
    rhs = cfg.c * (dva.T @ e + va.T @ (dva @ u))
    factor = HessianFactor(v, mask, cfg.c, mode=mode)
    return -factor.solve(rhs)


def vjp_inputs(v: np.ndarray, u: np.ndarray, g: np.ndarray,
               cfg: SvrConfig, mode: str = "auto") -> np.ndarray:
    """Per-frame gradients of L = g . u(V); rows of inactive frames are zero.

    Linear in g by construction: with w = H^{-1} g the active rows are
    -c * (e_t * w + (w . v_t) * u).
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    aset = _check_stationary(v, u, cfg)
    out = np.zeros_like(v)
    mask = aset.active
    if not mask.any():
        return out
    w = HessianFactor(v, mask, cfg.c, mode=mode).solve(g)
    e = aset.residuals[mask]
    out[mask] = -cfg.c * (np.outer(e, w) + np.outer(v[mask] @ w, u))
    return out


def grad_wrt_w(x: np.ndarray, w_matrix: np.ndarray, u: np.ndarray, g: np.ndarray,
               kind: MapKind, cfg: SvrConfig, mode: str = "full") -> np.ndarray:
    """Gradient of L = g . u(W) where frames enter as v_t = map(W x_t).

    'full' applies the exact inverse Hessian; 'diagonal' substitutes the
    diagonal approximation, which collapses the solve to a componentwise
    rescaling of g. Both modes coincide when the mapped width is 1. Raw
    frames x with zero rows contribute nothing (the chain rule multiplies
    by x_t).
    """
    if mode not in ("full", "diagonal"):
        raise ValueError(f"unknown gradient mode {mode!r}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    w_matrix = np.asarray(w_matrix, dtype=float)
    z = x @ w_matrix.T
    v = map_forward(kind, z)
    dl_dv = vjp_inputs(v, u, g, cfg, mode="auto" if mode == "full" else "diagonal")
    dl_dz = map_vjp(kind, z, dl_dv)
    return dl_dz.T @ x
