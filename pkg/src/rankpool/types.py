"""Core value types: sequences, encodings, solver output, datasets.

Instances are treated as immutable after construction; nothing in the
package mutates them in place, so they are safe to share across worker
processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSequence


def _as_frame(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    return arr


@dataclass
class FrameSequence:
    """Ordered frames of one sequence.

    Frames are kept as a tuple of 1-D vectors so that malformed input
    (ragged dimensions) can still be represented and reported by
    ``validate_dataset`` instead of exploding at construction time.

    Parameters
    ----------
    frames : iterable of 1-D arrays, or a (J, D) array
    id : stable identifier used in files and error messages
    label : dense class index, or None when unlabeled
    """

    frames: tuple
    id: str = ""
    label: int | None = None

    def __post_init__(self):
        if isinstance(self.frames, np.ndarray) and self.frames.ndim == 2:
            self.frames = tuple(np.array(row, dtype=float) for row in self.frames)
        else:
            self.frames = tuple(_as_frame(f) for f in self.frames)

    @classmethod
    def from_matrix(cls, matrix, id: str = "", label: int | None = None) -> "FrameSequence":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(frames=matrix, id=id, label=label)

    @property
    def length(self) -> int:
        return len(self.frames)

    @property
    def dim(self) -> int:
        return int(self.frames[0].size) if self.frames else 0

    @property
    def matrix(self) -> np.ndarray:
        """Frames stacked to a (J, D) float array.

        Raises InvalidSequence when the sequence cannot form a rectangular
        finite matrix; callers are expected to have validated first.
        """
        if not self.frames:
            raise InvalidSequence(f"sequence {self.id!r} has no frames")
        d = self.frames[0].size
        if d == 0:
            raise InvalidSequence(f"sequence {self.id!r} has zero-width frames")
        if any(f.size != d for f in self.frames):
            raise InvalidSequence(f"sequence {self.id!r} has mixed frame dimensions")
        m = np.vstack(self.frames)
        if not np.all(np.isfinite(m)):
            raise InvalidSequence(f"sequence {self.id!r} contains non-finite values")
        return m


@dataclass
class Encoding:
    """Fixed-length descriptor of one sequence plus the encoder that made it."""

    values: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)

    @property
    def dim(self) -> int:
        return int(self.values.size)


@dataclass
class RankPoolSolution:
    """Output of one rank-pool solve.

    residuals holds the epsilon-shrunk residuals e_t (zero inside the tube),
    active marks frames with e_t != 0.
    """

    u: Encoding
    objective: float
    grad_norm: float
    residuals: np.ndarray
    active: np.ndarray
    iterations: int

    @property
    def vector(self) -> np.ndarray:
        return self.u.values


@dataclass
class Dataset:
    """Sequences plus the table mapping dense labels to class names."""

    sequences: list
    class_names: list = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def labels(self) -> np.ndarray:
        return np.array([-1 if s.label is None else s.label for s in self.sequences], dtype=int)


@dataclass
class Violation:
    """One invariant breach found by validate_dataset."""

    sequence_id: str | None
    rule: str
    detail: str

    def __str__(self) -> str:
        where = self.sequence_id if self.sequence_id is not None else "<dataset>"
        return f"{where}: {self.rule}: {self.detail}"


def validate_dataset(dataset: Dataset, for_training: bool = False) -> list:
    """Collect invariant violations without aborting.

    Checks every sequence (non-empty, rectangular, finite, label range) and,
    when for_training is set, that every class has at least one sequence.
    Returns an empty list for a valid dataset; validation is read-only, so
    running it twice yields the same report.
    """
    violations = []
    k = dataset.n_classes
    seen = np.zeros(max(k, 1), dtype=bool)
    for seq in dataset.sequences:
        if seq.length == 0:
            violations.append(Violation(seq.id, "empty", "sequence has no frames"))
            continue
        dims = {f.size for f in seq.frames}
        if 0 in dims:
            violations.append(Violation(seq.id, "empty-frame", "frame with zero components"))
        elif len(dims) > 1:
            violations.append(Violation(
                seq.id, "ragged",
                f"mixed frame dimensions {sorted(dims)}"))
        else:
            flat = np.concatenate(seq.frames)
            if not np.all(np.isfinite(flat)):
                violations.append(Violation(seq.id, "non-finite", "frame contains nan or inf"))
        if seq.label is not None:
            if k and not (0 <= seq.label < k):
                violations.append(Violation(
                    seq.id, "label-range",
                    f"label {seq.label} outside [0, {k})"))
            elif k:
                seen[seq.label] = True
    if for_training and k:
        for c in range(k):
            if not seen[c]:
                violations.append(Violation(
                    None, "class-missing",
                    f"class {c} ({dataset.class_names[c]}) has no sequence"))
    return violations
