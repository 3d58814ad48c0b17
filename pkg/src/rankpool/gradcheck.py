"""Randomized finite-difference verification of the analytic gradients.

Each suite draws seeded random instances, computes one analytic gradient,
and compares against centered differences with Richardson extrapolation.
Instances where an FD probe would cross a hinge boundary or flip the
active set of the solution are excluded and counted as skipped, since the
implicit gradient is defined with the active set frozen at the solution.
Solves run at tol=1e-12 so solver noise stays far below the thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import solver
from .implicit import grad_wrt_scalar_param, grad_wrt_w, vjp_inputs
from .maps import MapKind, map_forward
from .solver import SvrConfig
from .synth import fd_gradient, fd_tangent
from .training import AffineMap, loss_and_score_grad, LossKind

SUITES = ("svr", "theta", "inputs", "W", "pipeline")
THRESHOLDS = {"svr": 1e-4, "theta": 1e-4, "inputs": 1e-4, "W": 1e-4, "pipeline": 1e-3}
_H = 1e-5
_TIGHT = SvrConfig(c=1.0, epsilon=0.1, tol=1e-12, max_iter=200)
_ATTEMPTS = 60


@dataclass
class SuiteReport:
    name: str
    threshold: float
    trials: int
    completed: int
    skipped: int
    max_rel_err: float

    @property
    def passed(self) -> bool:
        if self.trials == 0 or self.completed == 0:
            return True
        return self.max_rel_err < self.threshold

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"{self.name}: {status} max_rel_err={self.max_rel_err:.3e} "
                f"threshold={self.threshold:.0e} trials={self.completed} skipped={self.skipped}")


def _rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=float).reshape(-1)
    fd = np.asarray(fd, dtype=float).reshape(-1)
    denom = max(float(np.linalg.norm(fd)), float(np.linalg.norm(analytic)), 1e-10)
    return float(np.linalg.norm(analytic - fd)) / denom


def _boundary_margin(v: np.ndarray, u: np.ndarray, cfg: SvrConfig) -> float:
    """Distance of the closest residual to the tube boundary."""
    r = v @ u - solver.ranking_targets(v.shape[0])
    return float(np.min(np.abs(np.abs(r) - cfg.epsilon)))


class _FlipWatch:
    """Records whether any probe solve changed the active set."""

    def __init__(self, base_active: np.ndarray):
        self.base = np.asarray(base_active, dtype=bool)
        self.flipped = False

    def note(self, active: np.ndarray) -> None:
        if not np.array_equal(self.base, np.asarray(active, dtype=bool)):
            self.flipped = True


def _suite_svr(rng: np.random.Generator, trials: int) -> tuple:
    errs, skipped = [], 0
    for _ in range(trials):
        n = int(rng.integers(3, 13))
        d = int(rng.integers(2, 6))
        v = rng.standard_normal((n, d))
        u_star, _, grad_norm, _, _, _ = solver.solve(v, _TIGHT)
        point = None
        for _ in range(_ATTEMPTS):
            candidate = u_star + 0.5 * rng.standard_normal(d)
            margin = _boundary_margin(v, candidate, _TIGHT)
            if margin > 10.0 * _H * float(np.max(np.abs(v)) + 1.0):
                point = candidate
                break
        if point is None:
            skipped += 1
            continue
        analytic = solver.objective_gradient(v, point, _TIGHT)
        fd = fd_gradient(lambda q: solver.objective_value(v, q, _TIGHT), point, h=_H)
        errs.append(max(_rel_err(analytic, fd), grad_norm))
    return errs, skipped


def _suite_theta(rng: np.random.Generator, trials: int) -> tuple:
    errs, skipped = [], 0
    for _ in range(trials):
        n = int(rng.integers(4, 11))
        d = int(rng.integers(2, 5))
        v0 = rng.standard_normal((n, d))
        dv = rng.standard_normal((n, d))
        u0, _, _, _, active0, _ = solver.solve(v0, _TIGHT)
        watch = _FlipWatch(active0)

        def u_at(theta: float) -> np.ndarray:
            u, _, _, _, active, _ = solver.solve(v0 + theta * dv, _TIGHT)
            watch.note(active)
            return u

        fd = fd_tangent(u_at, 0.0, h=_H)
        if watch.flipped:
            skipped += 1
            continue
        analytic = grad_wrt_scalar_param(v0, u0, dv, _TIGHT)
        errs.append(_rel_err(analytic, fd))
    return errs, skipped


def _suite_inputs(rng: np.random.Generator, trials: int) -> tuple:
    errs, skipped = [], 0
    for _ in range(trials):
        n = int(rng.integers(3, 7))
        d = int(rng.integers(2, 4))
        v0 = rng.standard_normal((n, d))
        g = rng.standard_normal(d)
        u0, _, _, _, active0, _ = solver.solve(v0, _TIGHT)
        watch = _FlipWatch(active0)

        def loss_at(v_flat: np.ndarray) -> float:
            u, _, _, _, active, _ = solver.solve(v_flat.reshape(n, d), _TIGHT)
            watch.note(active)
            return float(g @ u)

        fd = fd_gradient(loss_at, v0.reshape(-1), h=_H).reshape(n, d)
        if watch.flipped:
            skipped += 1
            continue
        analytic = vjp_inputs(v0, u0, g, _TIGHT)
        errs.append(_rel_err(analytic, fd))
    return errs, skipped


def _w_instance(rng: np.random.Generator, kind: MapKind, n: int, d: int, with_bias: bool = False):
    """Draw (x, w, bias) keeping the pre-map activations away from relu kinks."""
    for _ in range(_ATTEMPTS):
        x = rng.standard_normal((n, d))
        w = np.eye(d) + 0.3 * rng.standard_normal((d, d))
        bias = 0.1 * rng.standard_normal(d) if with_bias else np.zeros(d)
        z = x @ w.T + bias
        if kind is MapKind.IDENTITY or np.min(np.abs(z)) > 10.0 * _H * float(np.max(np.abs(x)) + 1.0):
            return x, w, bias
    return None, None, None


def _suite_w(rng: np.random.Generator, trials: int) -> tuple:
    errs, skipped = [], 0
    for trial in range(trials):
        kind = MapKind.IDENTITY if trial % 2 == 0 else MapKind.RELU
        n = int(rng.integers(4, 9))
        d = int(rng.integers(2, 4))
        x, w, _ = _w_instance(rng, kind, n, d)
        g = rng.standard_normal(d)
        if x is None:
            skipped += 1
            continue
        u0, _, _, _, active0, _ = solver.solve(map_forward(kind, x @ w.T), _TIGHT)
        watch = _FlipWatch(active0)

        def loss_at(w_flat: np.ndarray) -> float:
            u, _, _, _, active, _ = solver.solve(
                map_forward(kind, x @ w_flat.reshape(d, d).T), _TIGHT)
            watch.note(active)
            return float(g @ u)

        fd = fd_gradient(loss_at, w.reshape(-1), h=_H).reshape(d, d)
        if watch.flipped:
            skipped += 1
            continue
        analytic = grad_wrt_w(x, w, u0, g, kind, _TIGHT, mode="full")
        errs.append(_rel_err(analytic, fd))
    return errs, skipped


def _suite_pipeline(rng: np.random.Generator, trials: int) -> tuple:
    errs, skipped = [], 0
    k = 3
    for trial in range(trials):
        kind = MapKind.IDENTITY if trial % 2 == 0 else MapKind.RELU
        n = int(rng.integers(4, 7))
        d = 3
        x, w, upstream_bias = _w_instance(rng, kind, n, d, with_bias=True)
        beta = rng.standard_normal((k, d))
        label = int(rng.integers(k))
        if x is None:
            skipped += 1
            continue
        u0, _, _, _, active0, _ = solver.solve(
            map_forward(kind, x @ w.T + upstream_bias), _TIGHT)
        watch = _FlipWatch(active0)

        def loss_at(theta: np.ndarray) -> float:
            weight = theta[:d * d].reshape(d, d)
            bias = theta[d * d:]
            u, _, _, _, active, _ = solver.solve(
                map_forward(kind, x @ weight.T + bias), _TIGHT)
            watch.note(active)
            value, _ = loss_and_score_grad(LossKind.CROSS_ENTROPY, beta @ u, label)
            return value

        theta0 = np.concatenate([w.reshape(-1), upstream_bias])
        fd = fd_gradient(loss_at, theta0, h=_H)
        if watch.flipped:
            skipped += 1
            continue
        upstream = AffineMap(w, upstream_bias, kind=kind)
        v = upstream.forward(x)
        _, gs = loss_and_score_grad(LossKind.CROSS_ENTROPY, beta @ u0, label)
        grad_v = vjp_inputs(v, u0, beta.T @ gs, _TIGHT)
        grads = upstream.backward(x, grad_v)
        analytic = np.concatenate([grads["weight"].reshape(-1), grads["bias"]])
        errs.append(_rel_err(analytic, fd))
    return errs, skipped


_RUNNERS = {
    "svr": _suite_svr,
    "theta": _suite_theta,
    "inputs": _suite_inputs,
    "W": _suite_w,
    "pipeline": _suite_pipeline,
}


def run_suite(name: str, trials: int = 20, seed: int = 0) -> SuiteReport:
    if name not in _RUNNERS:
        raise ValueError(f"unknown suite {name!r}, choose from {SUITES}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, SUITES.index(name)]))
    errs, skipped = _RUNNERS[name](rng, trials)
    return SuiteReport(
        name=name,
        threshold=THRESHOLDS[name],
        trials=trials,
        completed=len(errs),
        skipped=skipped,
        max_rel_err=max(errs) if errs else 0.0,
    )


def run_all(trials: int = 20, seed: int = 0) -> list:
    return [run_suite(name, trials=trials, seed=seed) for name in SUITES]
