"""Sequence-to-vector pooling operators.

avg/max/temporal-pyramid are order-insensitive baselines; rank_pool is the
order-sensitive encoder built on the ranking regression in solver.py.
"""

from __future__ import annotations

import numpy as np

from . import solver
from .solver import SvrConfig
from .types import Encoding, FrameSequence, RankPoolSolution


def avg_pool(seq: FrameSequence) -> Encoding:
    """Mean frame. Stationary point of u -> 0.5*sum_t ||u - v_t||^2."""
    return Encoding(seq.matrix.mean(axis=0), provenance="avg")


def max_pool(seq: FrameSequence) -> Encoding:
    """Componentwise maximum over frames."""
    return Encoding(seq.matrix.max(axis=0), provenance="max")


def temporal_pyramid(seq: FrameSequence, base: str = "avg") -> Encoding:
    """Two-level pyramid: whole sequence, first half, second half.

    The split point is ceil(J/2), so the first half takes the extra frame
    for odd J. A single frame degenerates to that frame repeated three
    times. Output width is 3*D.
    """
    pool = {"avg": np.mean, "max": np.max}[base]
    m = seq.matrix
    n = m.shape[0]
    split = -(-n // 2)
    first = m[:split]
    second = m[split:] if split < n else m
    values = np.concatenate([pool(m, axis=0), pool(first, axis=0), pool(second, axis=0)])
    return Encoding(values, provenance=f"pyramid-{base}")


def rank_pool(seq: FrameSequence, cfg: SvrConfig | None = None) -> RankPoolSolution:
    """Encode a sequence as the parameters of its fitted frame ranking."""
    cfg = cfg or SvrConfig()
    u, objective, grad_norm, residuals, active, iterations = solver.solve(seq.matrix, cfg)
    return RankPoolSolution(
        u=Encoding(u, provenance="rank"),
        objective=objective,
        grad_norm=grad_norm,
        residuals=residuals,
        active=active,
        iterations=iterations,
    )
