"""Classifier training on encodings, and end-to-end through the pooling.

Three trainers share one per-sample SGD core (momentum plus weight decay,
geometric learning-rate decay, one sequence per step):

* train_linear_classifier works on precomputed encodings.
* train_discriminative_rp learns a square frame transform W jointly with
  the classifier by backpropagating through the rank-pool argmin.
* train_end_to_end replaces W by an arbitrary upstream map exposing a
  forward pass and a reverse-mode hook for per-frame gradients.

All three are bit-reproducible given the dataset order, the seed, and the
config. Weight matrices are decayed; biases are not.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateLabels
from .implicit import grad_wrt_w, vjp_inputs
from .maps import MapKind, map_forward, map_vjp
from .pooling import rank_pool
from .solver import SvrConfig
from .types import Dataset, FrameSequence


class LossKind(str, enum.Enum):
    CROSS_ENTROPY = "cross-entropy"
    HINGE = "hinge"


@dataclass
class SgdConfig:
    """Optimizer settings shared by all trainers."""

    epochs: int = 30
    lr_start: float = 1e-3
    lr_end: float = 1e-5
    momentum: float = 0.9
    weight_decay: float = 5e-4
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        if self.lr_start <= 0 or self.lr_end <= 0:
            raise ValueError("learning rates must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay}")


END_TO_END_SGD = SgdConfig(epochs=60, lr_start=0.01, lr_end=0.0001)


def lr_at(epoch: int, cfg: SgdConfig) -> float:
    """Geometric interpolation from lr_start to lr_end across the schedule."""
    if cfg.epochs <= 1:
        return cfg.lr_start
    frac = epoch / (cfg.epochs - 1)
    return cfg.lr_start * (cfg.lr_end / cfg.lr_start) ** frac


def sgd_step(params: np.ndarray, grad: np.ndarray, velocity: np.ndarray | None,
             lr: float, cfg: SgdConfig, weight_decay: float | None = None):
    """One momentum step; returns (new params, new velocity).

    weight_decay=None uses cfg.weight_decay; trainers pass 0 for biases.
    """
    wd = cfg.weight_decay if weight_decay is None else weight_decay
    if velocity is None:
        velocity = np.zeros_like(params)
    velocity = cfg.momentum * velocity - lr * (grad + wd * params)
    return params + velocity, velocity


def softmax_prob(scores: np.ndarray) -> np.ndarray:
    """Class probabilities with the max shifted out for stability."""
    scores = np.asarray(scores, dtype=float)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def loss_and_score_grad(kind: LossKind, scores: np.ndarray, label: int):
    """Per-sample loss and its gradient wrt the class scores."""
    kind = LossKind(kind)
    if kind is LossKind.CROSS_ENTROPY:
        probs = softmax_prob(scores)
        loss = -float(np.log(max(probs[label], 1e-300)))
        grad = probs.copy()
        grad[label] -= 1.0
        return loss, grad
    signs = np.full(scores.shape, -1.0)
    signs[label] = 1.0
    slack = np.maximum(0.0, 1.0 - signs * scores)
    return float(slack @ slack), -2.0 * slack * signs


@dataclass
class Model:
    """A trained classifier, optionally with its learned frame transform.

    beta is (K, D_out) with one bias per class. When w (square) or an
    upstream map is present the model scores raw sequences by encoding
    them with its own svr config first; otherwise it expects precomputed
    encodings of width D_out.
    """

    class_names: list
    beta: np.ndarray
    bias: np.ndarray
    loss: LossKind = LossKind.CROSS_ENTROPY
    w: np.ndarray | None = None
    map_kind: MapKind = MapKind.IDENTITY
    svr: SvrConfig | None = None
    upstream: "AffineMap | None" = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.bias = np.asarray(self.bias, dtype=float).reshape(-1)
        self.loss = LossKind(self.loss)
        self.map_kind = MapKind(self.map_kind)
        if self.n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.n_classes}")
        if self.beta.shape[0] != self.n_classes or self.bias.size != self.n_classes:
            raise ValueError("beta/bias rows must match the class count")
        if self.w is not None:
            self.w = np.asarray(self.w, dtype=float)
            if self.w.ndim != 2 or self.w.shape[0] != self.w.shape[1]:
                raise ValueError(f"w must be square, got shape {self.w.shape}")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def dim(self) -> int:
        return int(self.beta.shape[1])

    @property
    def encodes_sequences(self) -> bool:
        return self.w is not None or self.upstream is not None

    def encode_sequence(self, seq: FrameSequence) -> np.ndarray:
        if not self.encodes_sequences:
            raise ValueError("model has no frame transform; supply encodings instead")
        x = seq.matrix
        if self.upstream is not None:
            frames = self.upstream.forward(x)
        else:
            frames = map_forward(self.map_kind, x @ self.w.T)
        svr = self.svr or SvrConfig()
        return rank_pool(FrameSequence.from_matrix(frames, id=seq.id), svr).vector

    def decision_scores(self, encodings: np.ndarray) -> np.ndarray:
        encodings = np.atleast_2d(np.asarray(encodings, dtype=float))
        return encodings @ self.beta.T + self.bias

    def predict(self, encodings: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_scores(encodings), axis=1)


@dataclass
class TrainResult:
    """Trained model plus the mean per-epoch training loss."""

    model: Model
    loss_history: list


class AffineMap:
    """Built-in upstream map: v_t = nonlinearity(weight x_t + bias)."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray, kind: MapKind = MapKind.IDENTITY):
        self.weight = np.atleast_2d(np.asarray(weight, dtype=float))
        self.bias = np.asarray(bias, dtype=float).reshape(-1)
        self.kind = MapKind(kind)
        if self.bias.size != self.weight.shape[0]:
            raise ValueError("bias length must match the output rows of weight")

    @classmethod
    def identity(cls, dim: int, kind: MapKind = MapKind.IDENTITY) -> "AffineMap":
        return cls(np.eye(dim), np.zeros(dim), kind=kind)

    def forward(self, frames: np.ndarray) -> np.ndarray:
        return map_forward(self.kind, frames @ self.weight.T + self.bias)

    def parameters(self) -> dict:
        return {"weight": self.weight, "bias": self.bias}

    def backward(self, frames: np.ndarray, grad_frames: np.ndarray) -> dict:
        """Per-frame output gradients pulled back to parameter gradients."""
        z = frames @ self.weight.T + self.bias
        dz = map_vjp(self.kind, z, grad_frames)
        return {"weight": dz.T @ frames, "bias": dz.sum(axis=0)}

    def set_parameter(self, name: str, value: np.ndarray) -> None:
        setattr(self, name, value)


class FrozenIdentity:
    """Upstream map with no parameters; frames pass through untouched."""

    def forward(self, frames: np.ndarray) -> np.ndarray:
        return frames

    def parameters(self) -> dict:
        return {}

    def backward(self, frames: np.ndarray, grad_frames: np.ndarray) -> dict:
        return {}

    def set_parameter(self, name: str, value: np.ndarray) -> None:
        raise KeyError(name)


def _check_labels(labels: np.ndarray, n_classes: int) -> None:
    if n_classes < 2:
        raise DegenerateLabels(f"need at least 2 classes, got {n_classes}")
    present = np.zeros(n_classes, dtype=bool)
    for y in labels:
        if not 0 <= y < n_classes:
            raise DegenerateLabels(f"label {y} outside [0, {n_classes})")
        present[y] = True
    missing = np.flatnonzero(~present)
    if missing.size:
        raise DegenerateLabels(f"classes with no example: {missing.tolist()}")


def train_linear_classifier(encodings: np.ndarray, labels: np.ndarray, class_names: list,
                            loss: LossKind = LossKind.CROSS_ENTROPY,
                            cfg: SgdConfig | None = None) -> TrainResult:
    """Fit beta/bias on fixed encodings by per-sample SGD."""
    cfg = cfg or SgdConfig()
    encodings = np.atleast_2d(np.asarray(encodings, dtype=float))
    labels = np.asarray(labels, dtype=int)
    k = len(class_names)
    _check_labels(labels, k)
    n, d = encodings.shape
    beta = np.zeros((k, d))
    bias = np.zeros(k)
    vel_beta = vel_bias = None
    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        epoch_loss = 0.0
        for i in rng.permutation(n):
            u = encodings[i]
            scores = beta @ u + bias
            sample_loss, gs = loss_and_score_grad(loss, scores, labels[i])
            epoch_loss += sample_loss
            beta, vel_beta = sgd_step(beta, np.outer(gs, u), vel_beta, lr, cfg)
            bias, vel_bias = sgd_step(bias, gs, vel_bias, lr, cfg, weight_decay=0.0)
        history.append(epoch_loss / n)
    model = Model(class_names=list(class_names), beta=beta, bias=bias, loss=loss)
    return TrainResult(model=model, loss_history=history)


def _dataset_matrices(dataset: Dataset):
    labels = dataset.labels()
    _check_labels(labels, dataset.n_classes)
    mats = [seq.matrix for seq in dataset.sequences]
    dims = {m.shape[1] for m in mats}
    if len(dims) > 1:
        raise ValueError(f"training needs a uniform frame dimension, got {sorted(dims)}")
    return mats, labels


def train_discriminative_rp(dataset: Dataset, loss: LossKind = LossKind.CROSS_ENTROPY,
                            svr: SvrConfig | None = None, cfg: SgdConfig | None = None,
                            map_kind: MapKind = MapKind.IDENTITY, grad_mode: str = "full",
                            init_epochs: int = 20, learn_w: bool = True) -> TrainResult:
    """Learn the square frame transform W jointly with the classifier.

    W starts at the identity and the classifier starts from a linear
    classifier pre-trained on the W=I encodings, so a zero-epoch run
    returns exactly the plain rank-pooling baseline. learn_w=False keeps
    W frozen at the identity (the comparison baseline) while the
    classifier still trains through the same loop.
    """
    svr = svr or SvrConfig()
    cfg = cfg or SgdConfig()
    mats, labels = _dataset_matrices(dataset)
    d = mats[0].shape[1]
    w = np.eye(d)
    frozen = [rank_pool(FrameSequence.from_matrix(map_forward(map_kind, m)), svr).vector
              for m in mats]
    init = train_linear_classifier(np.vstack(frozen), labels, dataset.class_names, loss,
                                   replace(cfg, epochs=init_epochs))
    beta, bias = init.model.beta, init.model.bias
    vel_beta = vel_bias = vel_w = None
    rng = np.random.default_rng(cfg.seed)
    n = len(mats)
    history = []
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        epoch_loss = 0.0
        for i in rng.permutation(n):
            x = mats[i]
            if learn_w:
                v = map_forward(map_kind, x @ w.T)
                u = rank_pool(FrameSequence.from_matrix(v), svr).vector
            else:
                u = frozen[i]
            scores = beta @ u + bias
            sample_loss, gs = loss_and_score_grad(loss, scores, labels[i])
            epoch_loss += sample_loss
            if learn_w:
                dw = grad_wrt_w(x, w, u, beta.T @ gs, map_kind, svr, mode=grad_mode)
                w, vel_w = sgd_step(w, dw, vel_w, lr, cfg)
            beta, vel_beta = sgd_step(beta, np.outer(gs, u), vel_beta, lr, cfg)
            bias, vel_bias = sgd_step(bias, gs, vel_bias, lr, cfg, weight_decay=0.0)
        history.append(epoch_loss / n)
    model = Model(class_names=list(dataset.class_names), beta=beta, bias=bias, loss=loss,
                  w=w, map_kind=map_kind, svr=svr)
    return TrainResult(model=model, loss_history=history)


def train_end_to_end(dataset: Dataset, upstream=None, loss: LossKind = LossKind.CROSS_ENTROPY,
                     svr: SvrConfig | None = None, cfg: SgdConfig | None = None) -> TrainResult:
    """Train an upstream frame map and the classifier through the pooling.

    The upstream object supplies forward(frames) plus a backward hook that
    turns per-frame gradients into parameter gradients; a map with no
    parameters (FrozenIdentity) reduces this trainer to
    train_linear_classifier on the pooled encodings.
    """
    svr = svr or SvrConfig()
    cfg = cfg or END_TO_END_SGD
    mats, labels = _dataset_matrices(dataset)
    if upstream is None:
        upstream = AffineMap.identity(mats[0].shape[1])
    k = len(dataset.class_names)
    dim_out = rank_pool(FrameSequence.from_matrix(upstream.forward(mats[0])), svr).vector.size
    beta = np.zeros((k, dim_out))
    bias = np.zeros(k)
    vel_beta = vel_bias = None
    velocities = {name: None for name in upstream.parameters()}
    rng = np.random.default_rng(cfg.seed)
    n = len(mats)
    history = []
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        epoch_loss = 0.0
        for i in rng.permutation(n):
            x = mats[i]
            v = upstream.forward(x)
            u = rank_pool(FrameSequence.from_matrix(v), svr).vector
            scores = beta @ u + bias
            sample_loss, gs = loss_and_score_grad(loss, scores, labels[i])
            epoch_loss += sample_loss
            du = beta.T @ gs
            beta, vel_beta = sgd_step(beta, np.outer(gs, u), vel_beta, lr, cfg)
            bias, vel_bias = sgd_step(bias, gs, vel_bias, lr, cfg, weight_decay=0.0)
            params = upstream.parameters()
            if params:
                grad_v = vjp_inputs(v, u, du, svr)
                for name, grad in upstream.backward(x, grad_v).items():
                    decay = cfg.weight_decay if params[name].ndim > 1 else 0.0
                    new_p, velocities[name] = sgd_step(
                        params[name], grad, velocities[name], lr, cfg, weight_decay=decay)
                    upstream.set_parameter(name, new_p)
        history.append(epoch_loss / n)
    model = Model(class_names=list(dataset.class_names), beta=beta, bias=bias, loss=loss,
                  svr=svr, upstream=upstream if upstream.parameters() else None)
    return TrainResult(model=model, loss_history=history)
