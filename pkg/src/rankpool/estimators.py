"""Estimator wrappers so the encoders and trainers compose with scikit-learn.

X is a list of sequences: FrameSequence objects or (J_i, D) arrays with
any J_i >= 1. Transformers emit one fixed-width row per sequence, so the
output stacks into an (n, D_out) array that downstream sklearn estimators
accept. All wrappers are stateless apart from validation bookkeeping; the
real work lives in the functional modules.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .hierarchy import HierarchyConfig, hrp_encode, recursive_encode
from .maps import MapKind, apply_map, tvm_smooth
from .pooling import avg_pool, max_pool, rank_pool, temporal_pyramid
from .solver import SvrConfig
from .training import (LossKind, Model, SgdConfig, train_discriminative_rp,
                       train_linear_classifier)
from .types import Dataset, FrameSequence, validate_dataset


def as_frame_sequence(x, index: int = 0) -> FrameSequence:
    """Coerce one input item to a FrameSequence."""
    if isinstance(x, FrameSequence):
        return x
    return FrameSequence.from_matrix(np.asarray(x, dtype=float), id=f"x{index}")


def check_sequences(X) -> list:
    """Validate a list of sequences, returning FrameSequence objects.

    Raises ValueError when any sequence is empty, ragged, non-finite, or
    when frame widths differ across sequences.
    """
    if isinstance(X, np.ndarray) and X.ndim == 2:
        X = [X]
    sequences = [as_frame_sequence(x, i) for i, x in enumerate(X)]
    if not sequences:
        raise ValueError("need at least one sequence")
    problems = validate_dataset(Dataset(sequences=sequences))
    if problems:
        raise ValueError("invalid sequences: " + "; ".join(str(p) for p in problems[:5]))
    dims = {s.dim for s in sequences}
    if len(dims) > 1:
        raise ValueError(f"sequences disagree on frame width: {sorted(dims)}")
    return sequences


def check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    return y


class _SequenceTransformer(TransformerMixin, BaseEstimator):
    """Shared fit/transform plumbing for the pooling transformers."""

    def fit(self, X, y=None):
        sequences = check_sequences(X)
        self.n_features_in_ = sequences[0].dim
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "n_features_in_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet, call fit first")
        sequences = check_sequences(X)
        return np.vstack([self._encode(s) for s in sequences])

    def _encode(self, seq: FrameSequence) -> np.ndarray:
        raise NotImplementedError


class AveragePooling(_SequenceTransformer):
    """Mean frame of each sequence; order-insensitive baseline."""

    def _encode(self, seq):
        return avg_pool(seq).values


class MaxPooling(_SequenceTransformer):
    """Componentwise max over frames; order-insensitive baseline."""

    def _encode(self, seq):
        return max_pool(seq).values


class TemporalPyramid(_SequenceTransformer):
    """Whole/first-half/second-half pooling concatenated (3x width).

    Parameters
    ----------
    base : 'avg' or 'max', the pooling inside each cell.
    """

    def __init__(self, base: str = "avg"):
        self.base = base

    def _encode(self, seq):
        return temporal_pyramid(seq, base=self.base).values


class RankPooling(_SequenceTransformer):
    """Order-sensitive encoding from the ranking regression.

    Parameters
    ----------
    c, epsilon : regression constants.
    tol, max_iter : solver stopping rule.
    map_kind : pointwise frame map applied before pooling.
    smooth : apply running-mean smoothing to the frames first.
    """

    def __init__(self, c: float = 1.0, epsilon: float = 0.1, tol: float = 1e-8,
                 max_iter: int = 200, map_kind: str = "identity", smooth: bool = False):
        self.c = c
        self.epsilon = epsilon
        self.tol = tol
        self.max_iter = max_iter
        self.map_kind = map_kind
        self.smooth = smooth

    def _encode(self, seq):
        if self.smooth:
            seq = FrameSequence.from_matrix(tvm_smooth(seq.matrix), id=seq.id, label=seq.label)
        seq = apply_map(seq, MapKind(self.map_kind))
        cfg = SvrConfig(c=self.c, epsilon=self.epsilon, tol=self.tol, max_iter=self.max_iter)
        return rank_pool(seq, cfg).vector


class HierarchicalRankPooling(_SequenceTransformer):
    """Stacked windowed rank pooling (depth layers, last one whole-sequence).

    Parameters
    ----------
    depth : number of layers including the final pool.
    window, stride : sliding-window shape of the hidden layers.
    map_kind : frame map applied at every layer ('ser' doubles width per layer).
    c, epsilon, tol, max_iter : shared solver settings.
    """

    def __init__(self, depth: int = 2, window: int = 20, stride: int = 1,
                 map_kind: str = "ser", c: float = 1.0, epsilon: float = 0.1,
                 tol: float = 1e-8, max_iter: int = 200):
        self.depth = depth
        self.window = window
        self.stride = stride
        self.map_kind = map_kind
        self.c = c
        self.epsilon = epsilon
        self.tol = tol
        self.max_iter = max_iter

    def _config(self) -> HierarchyConfig:
        return HierarchyConfig(
            depth=self.depth, windows=self.window, strides=self.stride,
            maps=MapKind(self.map_kind),
            svr=SvrConfig(c=self.c, epsilon=self.epsilon, tol=self.tol,
                          max_iter=self.max_iter))

    def _encode(self, seq):
        return hrp_encode(seq, self._config()).values


class RecursiveRankPooling(HierarchicalRankPooling):
    """Hierarchy variant whose hidden layers encode growing prefixes."""

    def __init__(self, depth: int = 2, map_kind: str = "ser", c: float = 1.0,
                 epsilon: float = 0.1, tol: float = 1e-8, max_iter: int = 200):
        super().__init__(depth=depth, window=1, stride=1, map_kind=map_kind,
                         c=c, epsilon=epsilon, tol=tol, max_iter=max_iter)

    def _encode(self, seq):
        return recursive_encode(seq, self._config()).values

    def get_params(self, deep=True):
        params = super().get_params(deep=deep)
        params.pop("window", None)
        params.pop("stride", None)
        return params


class FrameMap(TransformerMixin, BaseEstimator):
    """Apply a pointwise map to every frame; sequences in, sequences out.

    Composes in a Pipeline ahead of any pooling transformer.
    """

    def __init__(self, kind: str = "ser", smooth: bool = False):
        self.kind = kind
        self.smooth = smooth

    def fit(self, X, y=None):
        check_sequences(X)
        return self

    def transform(self, X) -> list:
        out = []
        for seq in check_sequences(X):
            if self.smooth:
                seq = FrameSequence.from_matrix(tvm_smooth(seq.matrix), id=seq.id,
                                                label=seq.label)
            out.append(apply_map(seq, MapKind(self.kind)))
        return out


class EncodingClassifier(ClassifierMixin, BaseEstimator):
    """Linear classifier on fixed encodings, trained by per-sample SGD.

    Parameters mirror SgdConfig; loss is 'cross-entropy' or 'hinge'.
    """

    def __init__(self, loss: str = "cross-entropy", epochs: int = 30,
                 lr_start: float = 1e-3, lr_end: float = 1e-5, momentum: float = 0.9,
                 weight_decay: float = 5e-4, seed: int = 0):
        self.loss = loss
        self.epochs = epochs
        self.lr_start = lr_start
        self.lr_end = lr_end
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.seed = seed

    def _sgd_config(self) -> SgdConfig:
        return SgdConfig(epochs=self.epochs, lr_start=self.lr_start, lr_end=self.lr_end,
                         momentum=self.momentum, weight_decay=self.weight_decay,
                         seed=self.seed)

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = check_labels(y, X.shape[0])
        self.classes_, dense = np.unique(y, return_inverse=True)
        result = train_linear_classifier(
            X, dense, [str(c) for c in self.classes_],
            loss=LossKind(self.loss), cfg=self._sgd_config())
        self.model_: Model = result.model
        self.loss_history_ = result.loss_history
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise NotFittedError("EncodingClassifier is not fitted yet, call fit first")
        return self.model_.decision_scores(np.atleast_2d(np.asarray(X, dtype=float)))

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def predict_proba(self, X) -> np.ndarray:
        from .training import softmax_prob

        return softmax_prob(self.decision_function(X))


class DiscriminativeRankPooling(ClassifierMixin, BaseEstimator):
    """Joint training of a frame transform W and a linear classifier.

    fit consumes raw sequences; predictions encode each sequence with the
    learned W before scoring.
    """

    def __init__(self, loss: str = "cross-entropy", map_kind: str = "identity",
                 grad_mode: str = "full", epochs: int = 30, init_epochs: int = 20,
                 lr_start: float = 1e-3, lr_end: float = 1e-5, momentum: float = 0.9,
                 weight_decay: float = 5e-4, seed: int = 0, c: float = 1.0,
                 epsilon: float = 0.1, tol: float = 1e-8, max_iter: int = 200,
                 learn_w: bool = True):
        self.loss = loss
        self.map_kind = map_kind
        self.grad_mode = grad_mode
        self.epochs = epochs
        self.init_epochs = init_epochs
        self.lr_start = lr_start
        self.lr_end = lr_end
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.seed = seed
        self.c = c
        self.epsilon = epsilon
        self.tol = tol
        self.max_iter = max_iter
        self.learn_w = learn_w

    def fit(self, X, y):
        sequences = check_sequences(X)
        y = check_labels(y, len(sequences))
        self.classes_, dense = np.unique(y, return_inverse=True)
        labeled = [FrameSequence(frames=s.frames, id=s.id, label=int(c))
                   for s, c in zip(sequences, dense)]
        dataset = Dataset(sequences=labeled, class_names=[str(c) for c in self.classes_])
        cfg = SgdConfig(epochs=self.epochs, lr_start=self.lr_start, lr_end=self.lr_end,
                        momentum=self.momentum, weight_decay=self.weight_decay,
                        seed=self.seed)
        svr = SvrConfig(c=self.c, epsilon=self.epsilon, tol=self.tol,
                        max_iter=self.max_iter)
        result = train_discriminative_rp(
            dataset, loss=LossKind(self.loss), svr=svr, cfg=cfg,
            map_kind=MapKind(self.map_kind), grad_mode=self.grad_mode,
            init_epochs=self.init_epochs, learn_w=self.learn_w)
        self.model_ = result.model
        self.loss_history_ = result.loss_history
        self.n_features_in_ = sequences[0].dim
        return self

    def decision_function(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "DiscriminativeRankPooling is not fitted yet, call fit first")
        encodings = np.vstack([self.model_.encode_sequence(s) for s in check_sequences(X)])
        return self.model_.decision_scores(encodings)

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
