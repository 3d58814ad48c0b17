"""File formats: dataset records, encoding tables, trained models.

Dataset files are line-delimited JSON, one record per line with fields
id, label (class name, integer, or null), and frames (J x D row-major).
Lines starting with '#' are comments; a comment line may carry a JSON
metadata object whose "classes" entry fixes the class order.

Encoding files are comma-delimited text with header id,label,u_0..u_{D-1},
values at 9 significant digits, preceded by one '#' metadata line echoing
the producing config. The --binary variant stores the same content as a
magic line, one JSON header line, then the raw little-endian float64 block
in row-major order; it exists so re-runs are byte-identical and round
trips are bit-exact.

Model files are versioned flat text, one key per line, floats at 17
significant digits for exact float64 round trips. See README for the full
layout.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError
from .maps import MapKind
from .solver import SvrConfig
from .training import AffineMap, LossKind, Model
from .types import Dataset, FrameSequence

ENCODING_BINARY_MAGIC = b"#rankpool-encodings-binary 1\n"
MODEL_MAGIC = "rankpool-model 1"


def _format_values(values, digits: int = 9) -> list:
    return [f"{x:.{digits}g}" for x in values]


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------- datasets

def _labels_to_table(raw_labels, meta_classes):
    names = [x for x in raw_labels if isinstance(x, str)]
    numbers = [x for x in raw_labels if isinstance(x, int) and not isinstance(x, bool)]
    if names and numbers:
        raise DataFormatError("dataset mixes string and integer labels")
    if meta_classes is not None:
        table = list(meta_classes)
        if names:
            missing = sorted(set(names) - set(table))
            if missing:
                raise DataFormatError(f"labels not in declared classes: {missing}")
        elif numbers and max(numbers) >= len(table):
            raise DataFormatError("integer label outside the declared class table")
        return table
    if names:
        return sorted(set(names))
    if numbers:
        low, high = min(numbers), max(numbers)
        if low < 0:
            raise DataFormatError(f"negative label {low}")
        return [str(i) for i in range(high + 1)]
    return []


def load_dataset(path: str) -> Dataset:
    raw = []
    meta_classes = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("{"):
                    try:
                        meta = json.loads(body)
                        meta_classes = meta.get("classes", meta_classes)
                    except json.JSONDecodeError:
                        pass
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise DataFormatError(f"{path}:{line_no}: not valid JSON: {err}") from err
            if not isinstance(rec, dict) or "frames" not in rec:
                raise DataFormatError(f"{path}:{line_no}: record needs a 'frames' field")
            raw.append((line_no, rec))
    table = _labels_to_table([rec.get("label") for _, rec in raw], meta_classes)
    index = {name: i for i, name in enumerate(table)}
    sequences = []
    for line_no, rec in raw:
        label = rec.get("label")
        if isinstance(label, str):
            label = index[label]
        elif isinstance(label, bool):
            raise DataFormatError(f"{path}:{line_no}: boolean label")
        frames_field = rec["frames"]
        if not isinstance(frames_field, list):
            raise DataFormatError(f"{path}:{line_no}: frames must be a list of rows")
        try:
            frames = tuple(np.asarray(row, dtype=float).reshape(-1) for row in frames_field)
        except (TypeError, ValueError) as err:
            raise DataFormatError(f"{path}:{line_no}: non-numeric frame row: {err}") from err
        sequences.append(FrameSequence(
            frames=frames, id=str(rec.get("id", f"row{line_no}")), label=label))
    return Dataset(sequences=sequences, class_names=table)


def write_dataset(path: str, dataset: Dataset, meta: dict | None = None) -> None:
    header = {"format": "rankpool-dataset", "version": 1, "classes": dataset.class_names}
    header.update(meta or {})
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + _json_line(header) + "\n")
        for seq in dataset.sequences:
            label = None if seq.label is None else dataset.class_names[seq.label]
            rec = {"id": seq.id, "label": label,
                   "frames": [[float(x) for x in f] for f in seq.frames]}
            fh.write(_json_line(rec) + "\n")


def load_dataset_dir(path: str) -> Dataset:
    """One delimited-text matrix per file; subdirectory names label their files."""

    def read_matrix(file_path):
        with open(file_path, "r", encoding="utf-8") as fh:
            text = fh.read()
        delimiter = "," if "," in text.split("\n", 1)[0] else None
        try:
            return np.loadtxt(file_path, delimiter=delimiter, ndmin=2)
        except ValueError as err:
            raise DataFormatError(f"{file_path}: not a numeric matrix: {err}") from err

    entries = sorted(os.listdir(path))
    loose = [e for e in entries if os.path.isfile(os.path.join(path, e)) and not e.startswith(".")]
    subdirs = [e for e in entries if os.path.isdir(os.path.join(path, e)) and not e.startswith(".")]
    sequences = []
    for name in loose:
        matrix = read_matrix(os.path.join(path, name))
        sequences.append(FrameSequence.from_matrix(matrix, id=os.path.splitext(name)[0]))
    for label, sub in enumerate(subdirs):
        for name in sorted(os.listdir(os.path.join(path, sub))):
            full = os.path.join(path, sub, name)
            if not os.path.isfile(full) or name.startswith("."):
                continue
            matrix = read_matrix(full)
            sequences.append(FrameSequence.from_matrix(
                matrix, id=f"{sub}/{os.path.splitext(name)[0]}", label=label))
    if not sequences:
        raise DataFormatError(f"{path}: no sequence files found")
    return Dataset(sequences=sequences, class_names=list(subdirs))


# --------------------------------------------------------------- encodings

@dataclass
class EncodingTable:
    """Loaded contents of an encoding file."""

    ids: list
    labels: list          # class indices, None where unlabeled
    values: np.ndarray    # (n, D)
    class_names: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def labeled(self):
        mask = [y is not None for y in self.labels]
        idx = np.flatnonzero(mask)
        labels = np.array([self.labels[i] for i in idx], dtype=int)
        return idx, labels


def write_encodings(path: str, ids, labels, values: np.ndarray, class_names,
                    config: dict, binary: bool = False) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    names = [None if y is None else class_names[y] for y in labels]
    header = {"format": "rankpool-encodings", "version": 1,
              "classes": list(class_names), "config": config}
    if binary:
        header.update(count=int(values.shape[0]), dim=int(values.shape[1]),
                      ids=list(ids), labels=names, dtype="<f8")
        with open(path, "wb") as fh:
            fh.write(ENCODING_BINARY_MAGIC)
            fh.write((_json_line(header) + "\n").encode("utf-8"))
            fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + _json_line(header) + "\n")
        cols = ",".join(f"u_{j}" for j in range(values.shape[1]))
        fh.write(f"id,label,{cols}\n" if cols else "id,label\n")
        for i, seq_id in enumerate(ids):
            label = names[i] if names[i] is not None else ""
            row = ",".join(_format_values(values[i]))
            fh.write(f"{seq_id},{label},{row}\n")


def load_encodings(path: str) -> EncodingTable:
    with open(path, "rb") as fh:
        magic = fh.read(len(ENCODING_BINARY_MAGIC))
        if magic == ENCODING_BINARY_MAGIC:
            header = json.loads(fh.readline().decode("utf-8"))
            count, dim = header["count"], header["dim"]
            block = fh.read(count * dim * 8)
            values = np.frombuffer(block, dtype="<f8").reshape(count, dim).copy()
            table = header.get("classes", [])
            index = {name: i for i, name in enumerate(table)}
            labels = [None if y is None else index[y] for y in header["labels"]]
            return EncodingTable(ids=list(header["ids"]), labels=labels, values=values,
                                 class_names=table, config=header.get("config", {}))
    ids, labels, rows = [], [], []
    table, config = [], {}
    with open(path, "r", encoding="utf-8") as fh:
        header_seen = False
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("{"):
                    try:
                        meta = json.loads(body)
                        table = meta.get("classes", table)
                        config = meta.get("config", config)
                    except json.JSONDecodeError:
                        pass
                continue
            if not header_seen:
                if not line.startswith("id,label"):
                    raise DataFormatError(f"{path}:{line_no}: missing id,label header")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise DataFormatError(f"{path}:{line_no}: too few columns")
            ids.append(parts[0])
            labels.append(parts[1] if parts[1] else None)
            try:
                rows.append([float(x) for x in parts[2:]])
            except ValueError as err:
                raise DataFormatError(f"{path}:{line_no}: bad value: {err}") from err
    if not header_seen:
        raise DataFormatError(f"{path}: empty encoding file")
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise DataFormatError(f"{path}: inconsistent column counts {sorted(widths)}")
    values = np.array(rows, dtype=float) if rows else np.zeros((0, 0))
    if not table:
        table = sorted({y for y in labels if y is not None})
    index = {name: i for i, name in enumerate(table)}
    try:
        label_ids = [None if y is None else index[y] for y in labels]
    except KeyError as err:
        raise DataFormatError(f"{path}: label {err} not in class table") from err
    return EncodingTable(ids=ids, labels=label_ids, values=values,
                         class_names=table, config=config)


# ------------------------------------------------------------------ models

def save_model(path: str, model: Model) -> None:
    lines = [MODEL_MAGIC,
             f"loss {model.loss.value}",
             f"classes {model.n_classes}",
             f"dim {model.dim}"]
    for i, name in enumerate(model.class_names):
        lines.append(f"class {i} {name}")
    lines.append("bias " + " ".join(_format_values(model.bias, 17)))
    for i in range(model.n_classes):
        lines.append(f"beta {i} " + " ".join(_format_values(model.beta[i], 17)))
    lines.append(f"map {model.map_kind.value}")
    if model.svr is not None:
        s = model.svr
        lines.append("svr " + " ".join(_format_values([s.c, s.epsilon, s.tol], 17))
                     + f" {s.max_iter}")
    if model.w is not None:
        for i in range(model.w.shape[0]):
            lines.append(f"w {i} " + " ".join(_format_values(model.w[i], 17)))
    if model.upstream is not None:
        up = model.upstream
        lines.append(f"upstream {up.kind.value}")
        for i in range(up.weight.shape[0]):
            lines.append(f"uweight {i} " + " ".join(_format_values(up.weight[i], 17)))
        lines.append("ubias " + " ".join(_format_values(up.bias, 17)))
    for key in sorted(model.meta):
        lines.append(f"meta {key} {model.meta[key]}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str) -> Model:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != MODEL_MAGIC:
        raise DataFormatError(f"{path}: not a {MODEL_MAGIC!r} file")
    fields: dict = {"class": {}, "beta": {}, "w": {}, "uweight": {}, "meta": {}}
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key in ("class", "beta", "w", "uweight"):
            idx_text, _, value = rest.partition(" ")
            fields[key][int(idx_text)] = value
        elif key == "meta":
            mkey, _, mval = rest.partition(" ")
            fields["meta"][mkey] = mval
        else:
            fields[key] = rest
    try:
        k = int(fields["classes"])
        class_names = [fields["class"][i] for i in range(k)]
        beta = np.array([[float(x) for x in fields["beta"][i].split()] for i in range(k)])
        bias = np.array([float(x) for x in fields["bias"].split()])
        loss = LossKind(fields["loss"])
        map_kind = MapKind(fields.get("map", "identity"))
    except (KeyError, ValueError) as err:
        raise DataFormatError(f"{path}: malformed model file: {err}") from err
    svr = None
    if "svr" in fields:
        c, eps, tol, max_iter = fields["svr"].split()
        svr = SvrConfig(c=float(c), epsilon=float(eps), tol=float(tol), max_iter=int(max_iter))
    w = None
    if fields["w"]:
        w = np.array([[float(x) for x in fields["w"][i].split()]
                      for i in range(len(fields["w"]))])
    upstream = None
    if "upstream" in fields:
        weight = np.array([[float(x) for x in fields["uweight"][i].split()]
                           for i in range(len(fields["uweight"]))])
        ubias = np.array([float(x) for x in fields["ubias"].split()])
        upstream = AffineMap(weight, ubias, kind=MapKind(fields["upstream"]))
    return Model(class_names=class_names, beta=beta, bias=bias, loss=loss, w=w,
                 map_kind=map_kind, svr=svr, upstream=upstream, meta=fields["meta"])
