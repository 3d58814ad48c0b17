"""Synthetic sequence generators and the independent numerical oracles.

The oracles exist to certify the production code, so they deliberately
restate the math from scratch: the 1-D solver check is a brute-force grid
search over an inlined copy of the objective, the inverse check is plain
Gauss-Jordan elimination, and the derivative check is centered differences
with one Richardson extrapolation. None of them call into solver.py or
implicit.py.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrix
from .types import Dataset, FrameSequence

ORDER_PATTERNS = ("forward", "reverse", "interleave")
KINDS = ("order-classes", "latent-ramp", "noise")


@dataclass
class SynthSpec:
    """Parameters of one synthetic dataset."""

    kind: str = "order-classes"
    k: int = 3
    n: int = 60
    d: int = 8
    j_min: int = 40
    j_max: int = 40
    noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "order-classes" and not 1 <= self.k <= len(ORDER_PATTERNS):
            raise ValueError(
                f"order-classes supports 1..{len(ORDER_PATTERNS)} classes, got {self.k}")
        if self.k < 1 or self.n < 1 or self.d < 1:
            raise ValueError("k, n, d must all be positive")
        if not 1 <= self.j_min <= self.j_max:
            raise ValueError(f"need 1 <= j_min <= j_max, got {self.j_min}..{self.j_max}")
        if self.noise < 0:
            raise ValueError(f"noise must be non-negative, got {self.noise}")


def pattern_indices(pattern: str, n_frames: int) -> np.ndarray:
    """Frame order of one class pattern as a permutation of 0..J-1.

    "interleave" deals the rank order into four consecutive blocks and
    swaps the middle two, i.e. it riffles the lower and upper halves
    block-wise. That keeps the whole-sequence trend close to "forward"
    (one global linear fit can barely tell them apart) while flipping the
    local slope in mid-sequence windows, which is exactly the structure a
    windowed hierarchy can see and a single flat fit cannot.
    """
    base = np.arange(n_frames)
    if pattern == "forward":
        return base
    if pattern == "reverse":
        return base[::-1]
    if pattern == "interleave":
        quarters = np.array_split(base, 4)
        return np.concatenate([quarters[0], quarters[2], quarters[1], quarters[3]])
    raise ValueError(f"unknown pattern {pattern!r}")


def order_pool(pool: np.ndarray, pattern: str, direction: np.ndarray) -> np.ndarray:
    """Sort a frame pool along `direction`, then permute by the pattern.

    The output is always a row permutation of the pool, so every pattern
    applied to the same pool shares one frame multiset.
    """
    ranked = pool[np.argsort(pool @ direction, kind="stable")]
    return ranked[pattern_indices(pattern, pool.shape[0])]


def _video_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def gen_order_classes(spec: SynthSpec) -> Dataset:
    """Sequences whose classes differ only in frame order.

    Every video draws a fresh Gaussian frame pool from a per-video stream
    that does not depend on the label, orders it by its class's pattern
    (frames ranked along one dataset-wide latent direction), then adds
    i.i.d. noise after ordering. Labels go round-robin, so class sizes are
    balanced whenever k divides n.
    """
    rng = np.random.default_rng(spec.seed)
    direction = rng.standard_normal(spec.d)
    direction /= np.linalg.norm(direction)
    sequences = []
    for i in range(spec.n):
        label = i % spec.k
        vr = _video_rng(spec.seed, i)
        j = int(vr.integers(spec.j_min, spec.j_max + 1))
        pool = vr.standard_normal((j, spec.d))
        frames = order_pool(pool, ORDER_PATTERNS[label], direction)
        frames = frames + spec.noise * vr.standard_normal((j, spec.d))
        sequences.append(FrameSequence.from_matrix(frames, id=f"seq{i:04d}", label=label))
    return Dataset(sequences=sequences, class_names=list(ORDER_PATTERNS[:spec.k]))


def gen_latent_ramp(spec: SynthSpec) -> Dataset:
    """Noisy linear ramps, one latent direction per class."""
    rng = np.random.default_rng(spec.seed)
    dirs = rng.standard_normal((spec.k, spec.d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    sequences = []
    for i in range(spec.n):
        label = i % spec.k
        vr = _video_rng(spec.seed, i)
        j = int(vr.integers(spec.j_min, spec.j_max + 1))
        ramp = np.linspace(1.0 / j, 1.0, j)[:, None] * dirs[label]
        frames = ramp + spec.noise * vr.standard_normal((j, spec.d))
        sequences.append(FrameSequence.from_matrix(frames, id=f"seq{i:04d}", label=label))
    return Dataset(sequences=sequences, class_names=[f"ramp{c}" for c in range(spec.k)])


def gen_noise(spec: SynthSpec) -> Dataset:
    """Pure Gaussian frames; labels carry no signal at all."""
    sequences = []
    for i in range(spec.n):
        vr = _video_rng(spec.seed, i)
        j = int(vr.integers(spec.j_min, spec.j_max + 1))
        frames = vr.standard_normal((j, spec.d))
        sequences.append(FrameSequence.from_matrix(frames, id=f"seq{i:04d}", label=i % spec.k))
    return Dataset(sequences=sequences, class_names=[f"class{c}" for c in range(spec.k)])


def generate(spec: SynthSpec) -> Dataset:
    return {
        "order-classes": gen_order_classes,
        "latent-ramp": gen_latent_ramp,
        "noise": gen_noise,
    }[spec.kind](spec)


def oracle_svr_1d(v, c: float, epsilon: float, lo: float = -10.0, hi: float = 10.0,
                  step: float = 1e-4, refinements: int = 1) -> float:
    """Brute-force minimizer of the 1-D ranking objective.

    Scans a uniform grid over [lo, hi], then narrows around the best point
    (each refinement shrinks the step by 100x over a +/- one-step bracket).
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    targets = np.arange(1, v.size + 1, dtype=float)

    def best_on(points: np.ndarray) -> float:
        excess = np.maximum(np.abs(np.outer(points, v) - targets) - epsilon, 0.0)
        loss = 0.5 * points**2 + 0.5 * c * np.sum(excess * excess, axis=1)
        return float(points[np.argmin(loss)])

    count = int(round((hi - lo) / step)) + 1
    u = best_on(lo + step * np.arange(count))
    for _ in range(refinements):
        step /= 100.0
        u = best_on(u + step * (np.arange(201) - 100))
    return u


def fd_gradient(f, x, h: float = 1e-5) -> np.ndarray:
    """Gradient of scalar f by centered differences plus one Richardson step."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros(x.size)
    flat = x.reshape(-1)
    for i in range(flat.size):
        probe = flat.copy()

        def delta(width: float) -> float:
            probe[i] = flat[i] + width
            hi_val = f(probe.reshape(x.shape))
            probe[i] = flat[i] - width
            lo_val = f(probe.reshape(x.shape))
            probe[i] = flat[i]
            return (hi_val - lo_val) / (2.0 * width)

        grad[i] = (4.0 * delta(h / 2.0) - delta(h)) / 3.0
    return grad.reshape(x.shape)


def fd_tangent(f, theta: float, h: float = 1e-5) -> np.ndarray:
    """Same scheme for a vector-valued function of one scalar."""

    def delta(width: float) -> np.ndarray:
        return (np.asarray(f(theta + width)) - np.asarray(f(theta - width))) / (2.0 * width)

    return (4.0 * delta(h / 2.0) - delta(h)) / 3.0


def direct_inverse(matrix: np.ndarray) -> np.ndarray:
    """Invert by Gauss-Jordan elimination with partial pivoting."""
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"need a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = max(float(np.max(np.abs(a))), 1.0)
    aug = np.hstack([a, np.eye(n)])
    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[pivot_row, col]) <= 1e-12 * scale:
            raise SingularMatrix(f"pivot breakdown in column {col}")
        if pivot_row != col:
            aug[[col, pivot_row]] = aug[[pivot_row, col]]
        aug[col] /= aug[col, col]
        others = np.arange(n) != col
        aug[others] -= np.outer(aug[others, col], aug[col])
    return aug[:, n:]
