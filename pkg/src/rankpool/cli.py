"""Command-line interface: encode, train, predict, eval, gradcheck, synth.

Exit codes: 0 success, 1 a requested check failed, 2 bad input or flags,
3 numerical failure (non-convergence, degenerate linear algebra).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import gradcheck as gradcheck_mod
from . import io as rpio
from .errors import (DataFormatError, DegenerateLabels, DegenerateUpdate, InvalidSequence,
                     NotConverged, PrefixTooShort, SingularMatrix, SolverDidNotConverge)
from .evaluation import accuracy, mean_average_precision, per_class_accuracy
from .hierarchy import HierarchyConfig, hrp_encode, recursive_encode
from .maps import MapKind, apply_map, l2_normalize, tvm_smooth
from .pooling import avg_pool, max_pool, rank_pool, temporal_pyramid
from .solver import SvrConfig
from .synth import SynthSpec, generate
from .training import (AffineMap, LossKind, SgdConfig, train_discriminative_rp,
                       train_end_to_end, train_linear_classifier)
from .types import Dataset, FrameSequence, validate_dataset

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3

METHODS = ("avg", "max", "pyramid", "rank", "recursive-rank", "hrp")
MAP_CHOICES = ("ser", "ssr", "relu", "identity")


@dataclass
class EncodeJob:
    """Picklable encoder settings shared with worker processes."""

    method: str
    window: int
    stride: int
    depth: int
    map_kind: str
    svr: SvrConfig
    smooth: bool
    l2norm: bool
    pyramid_base: str = "avg"


def encode_one(job: EncodeJob, seq: FrameSequence) -> np.ndarray:
    matrix = seq.matrix
    if job.smooth:
        matrix = tvm_smooth(matrix)
    if job.l2norm:
        matrix = l2_normalize(matrix)
    seq = FrameSequence.from_matrix(matrix, id=seq.id, label=seq.label)
    if job.method == "avg":
        return avg_pool(seq).values
    if job.method == "max":
        return max_pool(seq).values
    if job.method == "pyramid":
        return temporal_pyramid(seq, base=job.pyramid_base).values
    if job.method == "rank":
        return rank_pool(apply_map(seq, MapKind(job.map_kind)), job.svr).vector
    cfg = HierarchyConfig(depth=job.depth,
                          windows=job.window if job.method == "hrp" else 1,
                          strides=job.stride if job.method == "hrp" else 1,
                          maps=MapKind(job.map_kind), svr=job.svr)
    if job.method == "hrp":
        return hrp_encode(seq, cfg).values
    if job.method == "recursive-rank":
        return recursive_encode(seq, cfg).values
    raise ValueError(f"unknown method {job.method!r}")


def _resolve_jobs(requested: int | None) -> int:
    if requested is None:
        env = os.environ.get("RANKPOOL_JOBS", "").strip()
        if env:
            try:
                requested = int(env)
            except ValueError as err:
                raise DataFormatError(f"RANKPOOL_JOBS={env!r} is not an integer") from err
        else:
            requested = os.cpu_count() or 1
    if requested < 1:
        raise DataFormatError(f"jobs must be at least 1, got {requested}")
    return requested


def _svr_from_args(args) -> SvrConfig:
    return SvrConfig(c=args.svr_c, epsilon=args.svr_eps, tol=args.svr_tol,
                     max_iter=args.svr_max_iter)


def _load_input_dataset(args) -> Dataset:
    if getattr(args, "from_dir", None):
        return rpio.load_dataset_dir(args.from_dir)
    if not args.input:
        raise DataFormatError("no input given; use --input FILE or --from-dir DIR")
    return rpio.load_dataset(args.input)


def cmd_encode(args) -> int:
    dataset = _load_input_dataset(args)
    violations = validate_dataset(dataset)
    if violations:
        for v in violations:
            print(f"invalid input: {v}", file=sys.stderr)
        return EXIT_INPUT
    dims = {seq.dim for seq in dataset.sequences}
    if len(dims) > 1:
        print(f"invalid input: frame widths differ across records: {sorted(dims)}",
              file=sys.stderr)
        return EXIT_INPUT
    job = EncodeJob(method=args.method, window=args.window, stride=args.stride,
                    depth=args.depth, map_kind=args.map, svr=_svr_from_args(args),
                    smooth=args.smooth_tvm, l2norm=args.l2norm,
                    pyramid_base=args.pyramid_base)
    jobs = _resolve_jobs(args.jobs)
    worker = partial(encode_one, job)
    if jobs == 1 or len(dataset.sequences) < 2:
        rows = [worker(seq) for seq in dataset.sequences]
    else:
        chunk = max(1, len(dataset.sequences) // (jobs * 4))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(worker, dataset.sequences, chunksize=chunk))
    values = np.vstack(rows)
    config = {"method": args.method, "window": args.window, "stride": args.stride,
              "depth": args.depth, "map": args.map, "svr_c": args.svr_c,
              "svr_eps": args.svr_eps, "svr_tol": args.svr_tol,
              "svr_max_iter": args.svr_max_iter, "smooth_tvm": args.smooth_tvm,
              "l2norm": args.l2norm, "pyramid_base": args.pyramid_base}
    rpio.write_encodings(args.output, [s.id for s in dataset.sequences],
                         [s.label for s in dataset.sequences], values,
                         dataset.class_names, config, binary=args.binary)
    return EXIT_OK


def _sgd_from_args(args, mode: str) -> SgdConfig:
    lr_start = args.lr_start if args.lr_start is not None else (
        0.01 if mode == "end2end" else 1e-3)
    lr_end = args.lr_end if args.lr_end is not None else (
        0.0001 if mode == "end2end" else 1e-5)
    return SgdConfig(epochs=args.epochs, lr_start=lr_start, lr_end=lr_end,
                     momentum=args.momentum, weight_decay=args.weight_decay,
                     seed=args.seed)


def cmd_train(args) -> int:
    loss = LossKind(args.loss)
    cfg = _sgd_from_args(args, args.mode)
    if args.mode == "linear":
        table = rpio.load_encodings(args.input)
        idx, labels = table.labeled()
        if idx.size == 0:
            raise DegenerateLabels("encoding file has no labeled rows")
        result = train_linear_classifier(table.values[idx], labels, table.class_names,
                                         loss=loss, cfg=cfg)
        train_inputs, train_labels = table.values[idx], labels
    else:
        dataset = _load_input_dataset(args)
        violations = validate_dataset(dataset, for_training=True)
        if violations:
            for v in violations:
                print(f"invalid input: {v}", file=sys.stderr)
            return EXIT_INPUT
        svr = _svr_from_args(args)
        if args.mode == "discriminative":
            result = train_discriminative_rp(
                dataset, loss=loss, svr=svr, cfg=cfg, map_kind=MapKind(args.map),
                grad_mode=args.grad_mode, init_epochs=args.init_epochs)
        else:
            dim = dataset.sequences[0].dim
            upstream = AffineMap.identity(dim, kind=MapKind(args.map))
            result = train_end_to_end(dataset, upstream=upstream, loss=loss,
                                      svr=svr, cfg=cfg)
        train_inputs = np.vstack([result.model.encode_sequence(s)
                                  for s in dataset.sequences])
        train_labels = dataset.labels()
    for epoch, value in enumerate(result.loss_history):
        print(f"epoch {epoch} loss {value:.6f}", file=sys.stderr)
    train_acc = accuracy(result.model.predict(train_inputs), train_labels)
    print(f"training-accuracy={train_acc:.6f}")
    result.model.meta.update({"mode": args.mode, "epochs": str(args.epochs),
                              "seed": str(args.seed),
                              "training_accuracy": f"{train_acc:.6f}"})
    rpio.save_model(args.output, result.model)
    return EXIT_OK


def _scores_and_labels(args, model):
    """Score the eval input with the model; labels mapped into model space."""
    name_to_model = {name: i for i, name in enumerate(model.class_names)}
    if args.dataset:
        if not model.encodes_sequences:
            raise DataFormatError(
                "model has no frame transform; evaluate against --encodings instead")
        dataset = rpio.load_dataset(args.dataset)
        violations = validate_dataset(dataset)
        if violations:
            raise DataFormatError("; ".join(str(v) for v in violations))
        ids = [s.id for s in dataset.sequences]
        encodings = np.vstack([model.encode_sequence(s) for s in dataset.sequences])
        raw = [(dataset.class_names[s.label] if s.label is not None else None)
               for s in dataset.sequences]
    else:
        table = rpio.load_encodings(args.encodings)
        ids = table.ids
        encodings = table.values
        raw = [(table.class_names[y] if y is not None else None) for y in table.labels]
    labels = []
    for name in raw:
        if name is None:
            labels.append(None)
        elif name not in name_to_model:
            raise DataFormatError(f"label {name!r} unknown to the model")
        else:
            labels.append(name_to_model[name])
    return ids, encodings, labels


def cmd_eval(args) -> int:
    model = rpio.load_model(args.model)
    _, encodings, labels = _scores_and_labels(args, model)
    mask = [y is not None for y in labels]
    if not any(mask):
        raise DataFormatError("eval input has no labeled rows")
    keep = np.flatnonzero(mask)
    y = np.array([labels[i] for i in keep], dtype=int)
    scores = model.decision_scores(encodings[keep])
    predicted = np.argmax(scores, axis=1)
    acc = accuracy(predicted, y)
    per_class = per_class_accuracy(predicted, y, model.n_classes)
    mean_ap = mean_average_precision(scores, y)
    if args.kv:
        print(f"accuracy={acc:.6f}")
        print(f"map={mean_ap:.6f}")
        for i, name in enumerate(model.class_names):
            if not np.isnan(per_class[i]):
                print(f"acc_{name}={per_class[i]:.6f}")
    else:
        print(f"accuracy {acc:.4f} on {y.size} sequences")
        for i, name in enumerate(model.class_names):
            note = "absent" if np.isnan(per_class[i]) else f"{per_class[i]:.4f}"
            print(f"  class {name}: {note}")
        print(f"mAP {mean_ap:.4f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = rpio.load_model(args.model)
    ids, encodings, _ = _scores_and_labels(args, model)
    predicted = model.predict(encodings)
    lines = [f"{seq_id},{model.class_names[p]}" for seq_id, p in zip(ids, predicted)]
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    names = gradcheck_mod.SUITES if args.suite == "all" else (args.suite,)
    if args.trials == 0:
        print("warning: 0 trials requested, vacuous pass", file=sys.stderr)
        for name in names:
            print(f"{name}: pass (no trials)")
        return EXIT_OK
    failed = False
    for name in names:
        report = gradcheck_mod.run_suite(name, trials=args.trials, seed=args.seed)
        print(report.line())
        if report.skipped > 0:
            print(f"  note: {report.skipped} instance(s) skipped for active-set instability",
                  file=sys.stderr)
        failed = failed or not report.passed
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec(kind=args.kind, k=args.k, n=args.n, d=args.d, j_min=args.j_min,
                     j_max=args.j_max, noise=args.noise, seed=args.seed)
    dataset = generate(spec)
    meta = {"kind": spec.kind, "k": spec.k, "n": spec.n, "d": spec.d,
            "j_min": spec.j_min, "j_max": spec.j_max, "noise": spec.noise,
            "seed": spec.seed}
    rpio.write_dataset(args.output, dataset, meta=meta)
    return EXIT_OK


def _add_svr_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--svr-c", type=float, default=1.0, help="regression constant C")
    p.add_argument("--svr-eps", type=float, default=0.1, help="insensitivity width")
    p.add_argument("--svr-tol", type=float, default=1e-8, help="gradient-norm stop")
    p.add_argument("--svr-max-iter", type=int, default=200, help="solver iteration cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankpool",
        description="Encode variable-length sequences into fixed-length descriptors "
                    "by rank pooling, and train classifiers on or through them.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a dataset file into an encoding table")
    p.add_argument("--input", "-i", help="line-delimited JSON dataset")
    p.add_argument("--from-dir", help="directory of delimited-text matrices instead")
    p.add_argument("--output", "-o", required=True, help="encoding file to write")
    p.add_argument("--method", choices=METHODS, default="hrp")
    p.add_argument("--window", type=int, default=20, help="layer window length")
    p.add_argument("--stride", type=int, default=1, help="layer window stride")
    p.add_argument("--depth", type=int, default=2, help="hierarchy depth")
    p.add_argument("--map", choices=MAP_CHOICES, default="ser",
                   help="frame map for the rank-family methods")
    p.add_argument("--smooth-tvm", action="store_true",
                   help="running-mean smoothing before encoding")
    p.add_argument("--l2norm", action="store_true",
                   help="L2-normalize frames before encoding")
    p.add_argument("--pyramid-base", choices=("avg", "max"), default="avg")
    p.add_argument("--binary", action="store_true", help="write the binary format")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default: RANKPOOL_JOBS or all cores)")
    _add_svr_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", help="train a classifier, optionally through the pooling")
    p.add_argument("--mode", choices=("linear", "discriminative", "end2end"),
                   default="linear")
    p.add_argument("--input", "-i", help="encodings (linear) or dataset (other modes)")
    p.add_argument("--from-dir", help="directory dataset for the sequence modes")
    p.add_argument("--output", "-o", required=True, help="model file to write")
    p.add_argument("--loss", choices=[k.value for k in LossKind], default="cross-entropy")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr-start", type=float, default=None,
                   help="default 1e-3, or 0.01 for end2end")
    p.add_argument("--lr-end", type=float, default=None,
                   help="default 1e-5, or 0.0001 for end2end")
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--map", choices=MAP_CHOICES, default="identity",
                   help="frame map inside the learned transform")
    p.add_argument("--grad-mode", choices=("full", "diagonal"), default="full")
    p.add_argument("--init-epochs", type=int, default=20,
                   help="classifier pre-training epochs (discriminative mode)")
    _add_svr_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict labels with a trained model")
    p.add_argument("--model", "-m", required=True)
    p.add_argument("--encodings", help="encoding file to score")
    p.add_argument("--dataset", help="dataset file (models with a frame transform)")
    p.add_argument("--output", "-o", help="write id,label lines here instead of stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="accuracy, per-class accuracy, and mAP of a model")
    p.add_argument("--model", "-m", required=True)
    p.add_argument("--encodings", help="encoding file to score")
    p.add_argument("--dataset", help="dataset file (models with a frame transform)")
    p.add_argument("--kv", action="store_true", help="machine-readable key=value block")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference checks of the gradients")
    p.add_argument("--suite", choices=gradcheck_mod.SUITES + ("all",), default="all")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="generate a synthetic dataset file")
    p.add_argument("--kind", choices=("order-classes", "latent-ramp", "noise"),
                   default="order-classes")
    p.add_argument("--k", type=int, default=3, help="number of classes")
    p.add_argument("--n", type=int, default=60, help="number of sequences")
    p.add_argument("--d", type=int, default=8, help="frame width")
    p.add_argument("--j-min", type=int, default=40)
    p.add_argument("--j-max", type=int, default=40)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_INPUT if err.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (DataFormatError, InvalidSequence, DegenerateLabels, PrefixTooShort,
            FileNotFoundError, IsADirectoryError, NotADirectoryError, PermissionError,
            ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverDidNotConverge, NotConverged, DegenerateUpdate, SingularMatrix,
            np.linalg.LinAlgError) as err:
        context = getattr(err, "context", None)
        where = f" ({context})" if context else ""
        print(f"numeric error: {err}{where}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
