"""Pointwise frame maps and temporal smoothing.

All forward maps act row-wise on (J, D) matrices. SER doubles the width by
splitting positive and negative parts into separate square-rooted blocks
(positives occupy columns 0..D-1, negatives D..2D-1); everything else is
width-preserving. Each map also has a vjp used when differentiating through
a map application: derivatives at the non-smooth points (0 for ser, ssr,
relu) are taken as 0.
"""

from __future__ import annotations

import enum

import numpy as np

from .types import FrameSequence


class MapKind(str, enum.Enum):
    SER = "ser"
    SSR = "ssr"
    RELU = "relu"
    L2NORM = "l2norm"
    IDENTITY = "identity"


def ser(x: np.ndarray) -> np.ndarray:
    """Square roots of the positive and negative parts, concatenated."""
    x = np.asarray(x, dtype=float)
    pos = np.sqrt(np.maximum(x, 0.0))
    neg = np.sqrt(np.maximum(-x, 0.0))
    return np.concatenate([pos, neg], axis=-1)


def ssr(x: np.ndarray) -> np.ndarray:
    """Signed square root, elementwise."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.sqrt(np.abs(x))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def l2_normalize(x: np.ndarray) -> np.ndarray:
    """Rows scaled to unit norm; zero rows pass through unchanged."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    return x / safe


_FORWARD = {
    MapKind.SER: ser,
    MapKind.SSR: ssr,
    MapKind.RELU: relu,
    MapKind.L2NORM: l2_normalize,
    MapKind.IDENTITY: lambda x: np.asarray(x, dtype=float),
}


def output_dim(kind: MapKind, d: int) -> int:
    return 2 * d if MapKind(kind) is MapKind.SER else d


def map_forward(kind: MapKind, x: np.ndarray) -> np.ndarray:
    return _FORWARD[MapKind(kind)](x)


def map_vjp(kind: MapKind, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Pull a cotangent on map(x) back to x. Shapes follow map_forward."""
    kind = MapKind(kind)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    grad_out = np.atleast_2d(np.asarray(grad_out, dtype=float))
    if kind is MapKind.IDENTITY:
        return grad_out.copy()
    if kind is MapKind.RELU:
        return grad_out * (x > 0.0)
    if kind is MapKind.SSR:
        dx = np.zeros_like(x)
        nz = x != 0.0
        dx[nz] = 0.5 / np.sqrt(np.abs(x[nz]))
        return grad_out * dx
    if kind is MapKind.SER:
        d = x.shape[-1]
        gpos, gneg = grad_out[..., :d], grad_out[..., d:]
        out = np.zeros_like(x)
        p = x > 0.0
        n = x < 0.0
        out[p] = gpos[p] * 0.5 / np.sqrt(x[p])
        out[n] = gneg[n] * (-0.5) / np.sqrt(-x[n])
        return out
    if kind is MapKind.L2NORM:
        norms = np.linalg.norm(x, axis=-1, keepdims=True)
        out = np.empty_like(x)
        zero = norms[..., 0] == 0.0
        out[zero] = grad_out[zero]
        nzn = norms[~zero]
        xs, gs = x[~zero], grad_out[~zero]
        out[~zero] = gs / nzn - xs * np.sum(xs * gs, axis=-1, keepdims=True) / nzn**3
        return out
    raise ValueError(f"unknown map kind {kind!r}")


def tvm_smooth(matrix: np.ndarray) -> np.ndarray:
    """Replace frame t by the running mean of frames 1..t."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    counts = np.arange(1, m.shape[0] + 1, dtype=float)[:, None]
    return np.cumsum(m, axis=0) / counts


def apply_map(seq: FrameSequence, kind: MapKind) -> FrameSequence:
    """Map every frame of a sequence, preserving id, label, and length."""
    out = map_forward(kind, seq.matrix)
    return FrameSequence.from_matrix(out, id=seq.id, label=seq.label)
