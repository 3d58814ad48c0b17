"""Stacked rank pooling over sliding windows.

A depth-L hierarchy applies L-1 windowed layers and then one whole-sequence
pool. Every layer first maps its input frames (SER by default, doubling the
width), so the default all-SER hierarchy emits 2^L * D components. Depth 1
skips the windowed layers entirely and equals rank_pool(apply_map(X)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PrefixTooShort, SolverDidNotConverge
from .maps import MapKind, apply_map, map_forward, output_dim
from .pooling import rank_pool
from .solver import SvrConfig
from .types import Encoding, FrameSequence


def _per_layer(value, depth, cast):
    if isinstance(value, (list, tuple)):
        return tuple(cast(x) for x in value)
    return tuple(cast(value) for _ in range(depth))


@dataclass
class HierarchyConfig:
    """Depth plus per-layer window, stride, and map settings.

    windows/strides/maps must each have one entry per layer; the final
    layer's window and stride are carried for uniformity but unused, since
    the top pool always spans the whole remaining sequence. Scalars given
    to the constructor broadcast to all layers.
    """

    depth: int = 2
    windows: tuple = (20, 20)
    strides: tuple = (1, 1)
    maps: tuple = (MapKind.SER, MapKind.SER)
    svr: SvrConfig = field(default_factory=SvrConfig)

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be at least 1, got {self.depth}")
        self.windows = _per_layer(self.windows, self.depth, int)
        self.strides = _per_layer(self.strides, self.depth, int)
        self.maps = _per_layer(self.maps, self.depth, MapKind)
        for name, values, low in (("windows", self.windows, 1), ("strides", self.strides, 1)):
            if len(values) != self.depth:
                raise ValueError(f"{name} has {len(values)} entries for depth {self.depth}")
            if any(x < low for x in values):
                raise ValueError(f"{name} entries must be >= {low}: {values}")
        if len(self.maps) != self.depth:
            raise ValueError(f"maps has {len(self.maps)} entries for depth {self.depth}")

    def output_dim(self, d: int) -> int:
        for kind in self.maps:
            d = output_dim(kind, d)
        return d


@dataclass
class LayerOutput:
    """One layer's encodings plus the source window of each element."""

    elements: np.ndarray
    windows: list

    @property
    def length(self) -> int:
        return self.elements.shape[0]

    def to_sequence(self, template: FrameSequence) -> FrameSequence:
        return FrameSequence.from_matrix(self.elements, id=template.id, label=template.label)


def window_starts(n_frames: int, window: int, stride: int) -> list:
    """Start offsets of full windows; a short sequence clamps to one window."""
    if n_frames < window:
        return [0]
    return list(range(0, n_frames - window + 1, stride))


def rank_pool_layer(seq: FrameSequence, window: int, stride: int,
                    kind: MapKind, cfg: SvrConfig) -> LayerOutput:
    """Rank-pool the mapped frames of every sliding window.

    Windows are full-length only, starting every `stride` frames; a
    sequence shorter than the window yields a single whole-sequence
    window. Element count is floor((J - M)/S) + 1 for J >= M, else 1.
    """
    mapped = map_forward(kind, seq.matrix)
    n = mapped.shape[0]
    starts = window_starts(n, window, stride)
    elements = np.empty((len(starts), mapped.shape[1]))
    spans = []
    for i, start in enumerate(starts):
        length = min(window, n)
        piece = FrameSequence.from_matrix(mapped[start:start + length], id=seq.id)
        try:
            elements[i] = rank_pool(piece, cfg).vector
        except SolverDidNotConverge as err:
            raise err.add_context(sequence=seq.id, window_start=start, window_length=length)
        spans.append((start, length))
    return LayerOutput(elements=elements, windows=spans)


def hrp_encode(seq: FrameSequence, cfg: HierarchyConfig | None = None) -> Encoding:
    """Encode a sequence with a depth-L windowed rank-pool hierarchy."""
    cfg = cfg or HierarchyConfig()
    current = seq
    for layer in range(cfg.depth - 1):
        try:
            out = rank_pool_layer(current, cfg.windows[layer], cfg.strides[layer],
                                  cfg.maps[layer], cfg.svr)
        except SolverDidNotConverge as err:
            raise err.add_context(layer=layer)
        current = out.to_sequence(seq)
    top = apply_map(current, cfg.maps[cfg.depth - 1])
    try:
        solution = rank_pool(top, cfg.svr)
    except SolverDidNotConverge as err:
        raise err.add_context(layer=cfg.depth - 1, sequence=seq.id)
    return Encoding(solution.vector, provenance=f"hrp-depth{cfg.depth}")


def recursive_rank_pool(seq: FrameSequence, kind: MapKind, cfg: SvrConfig) -> LayerOutput:
    """Element t encodes the mapped prefix frames 1..t, for t = 2..J."""
    if seq.length < 2:
        raise PrefixTooShort(f"sequence {seq.id!r} has {seq.length} frame(s), need 2")
    mapped = map_forward(kind, seq.matrix)
    elements = np.empty((seq.length - 1, mapped.shape[1]))
    spans = []
    for i, t in enumerate(range(2, seq.length + 1)):
        piece = FrameSequence.from_matrix(mapped[:t], id=seq.id)
        try:
            elements[i] = rank_pool(piece, cfg).vector
        except SolverDidNotConverge as err:
            raise err.add_context(sequence=seq.id, window_start=0, window_length=t)
        spans.append((0, t))
    return LayerOutput(elements=elements, windows=spans)


def recursive_encode(seq: FrameSequence, cfg: HierarchyConfig | None = None) -> Encoding:
    """Depth-L variant where each hidden layer is the recursive pool."""
    cfg = cfg or HierarchyConfig()
    current = seq
    for layer in range(cfg.depth - 1):
        try:
            out = recursive_rank_pool(current, cfg.maps[layer], cfg.svr)
        except SolverDidNotConverge as err:
            raise err.add_context(layer=layer)
        current = out.to_sequence(seq)
    top = apply_map(current, cfg.maps[cfg.depth - 1])
    try:
        solution = rank_pool(top, cfg.svr)
    except SolverDidNotConverge as err:
        raise err.add_context(layer=cfg.depth - 1, sequence=seq.id)
    return Encoding(solution.vector, provenance=f"recursive-depth{cfg.depth}")
