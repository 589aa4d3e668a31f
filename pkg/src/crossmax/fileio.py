"""Versioned plain-text file formats used by the command-line stages.

Every format opens with a magic/version header; readers reject anything they
do not recognize.  Floats are written with ``repr`` (shortest round-trip
form), so rewriting the same data yields byte-identical files.

Skeleton file (``crossmax-skeleton 1``)::

    crossmax-skeleton 1
    <id> <label|-> <T> <N> <3*T*N floats, row-major frame/joint/xyz>

Topology file (``crossmax-topology 1``)::

    crossmax-topology 1
    <child> <parent>          # one edge per line

Embedding file (``crossmax-embeddings 1``)::

    crossmax-embeddings 1
    <N> <C> <modality>
    <C floats>                # one row per sample

Logits file (``crossmax-logits 1``)::

    crossmax-logits 1
    <N> <K>
    <id> <label|-> <K floats joints> <K floats bones> <K floats velocities>
         <dist_joints> <dist_bones> <dist_velocities>

Score table (``# crossmax-scores 1`` comment line, then CSV)::

    # crossmax-scores 1
    id,true_label,predicted_class,p_prob,novelty
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .mmd import MODALITIES, EmbeddingBatch
from .scoring import LogitsRecord
from .skeleton import BoneTopology, SkeletonSequence

FORMAT_VERSION = 1
SKELETON_MAGIC = "crossmax-skeleton"
TOPOLOGY_MAGIC = "crossmax-topology"
EMBEDDINGS_MAGIC = "crossmax-embeddings"
LOGITS_MAGIC = "crossmax-logits"
SCORES_MAGIC = "crossmax-scores"
CURVE_MAGIC = "crossmax-curve"

CURVE_COLUMNS = {"roc": ["fpr", "tpr"], "pr": ["recall", "precision"]}


def _header(magic: str) -> str:
    return f"{magic} {FORMAT_VERSION}"


def _check_header(line: str, magic: str, path) -> None:
    parts = line.split()
    if len(parts) != 2 or parts[0] != magic or parts[1] != str(FORMAT_VERSION):
        raise DataError(f"{path}: expected header {_header(magic)!r}, got {line!r}")


def _fmt_floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _read_lines(path) -> list[str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return [ln for ln in text.splitlines() if ln.strip()]


def write_skeletons(path, sequences, ids=None) -> None:
    """Write labeled sequences; ids default to s0, s1, ..."""
    sequences = list(sequences)
    if ids is None:
        ids = [f"s{i}" for i in range(len(sequences))]
    if len(ids) != len(sequences):
        raise DataError("ids must align with the sequences")
    lines = [_header(SKELETON_MAGIC)]
    for sid, seq in zip(ids, sequences):
        label = "-" if seq.label is None else str(int(seq.label))
        t, n, _ = seq.coords.shape
        lines.append(f"{sid} {label} {t} {n} {_fmt_floats(seq.coords.reshape(-1))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_skeletons(path) -> tuple[list[str], list[SkeletonSequence]]:
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path}: empty skeleton file")
    _check_header(lines[0], SKELETON_MAGIC, path)
    ids, sequences = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if len(tok) < 4:
            raise DataError(f"{path}:{lineno}: truncated skeleton record")
        sid, label_tok, t_tok, n_tok = tok[:4]
        try:
            t, n = int(t_tok), int(n_tok)
            label = None if label_tok == "-" else int(label_tok)
            values = [float(v) for v in tok[4:]]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        if len(values) != t * n * 3:
            raise DataError(
                f"{path}:{lineno}: expected {t * n * 3} coordinates, got {len(values)}"
            )
        coords = np.asarray(values, dtype=np.float64).reshape(t, n, 3)
        ids.append(sid)
        sequences.append(SkeletonSequence(coords, label=label))
    if not sequences:
        raise DataError(f"{path}: no skeleton records")
    return ids, sequences


def write_topology(path, topo: BoneTopology) -> None:
    lines = [_header(TOPOLOGY_MAGIC)]
    lines += [f"{child} {parent}" for child, parent in topo.edges]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_topology(path) -> BoneTopology:
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path}: empty topology file")
    _check_header(lines[0], TOPOLOGY_MAGIC, path)
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if len(tok) != 2:
            raise DataError(f"{path}:{lineno}: expected 'child parent'")
        try:
            edges.append((int(tok[0]), int(tok[1])))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return BoneTopology(tuple(edges))


def write_embeddings(path, batch: EmbeddingBatch) -> None:
    lines = [_header(EMBEDDINGS_MAGIC)]
    n, c = batch.data.shape
    lines.append(f"{n} {c} {batch.modality}")
    lines += [_fmt_floats(row) for row in batch.data]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_embeddings(path) -> EmbeddingBatch:
    lines = _read_lines(path)
    if len(lines) < 2:
        raise DataError(f"{path}: truncated embedding file")
    _check_header(lines[0], EMBEDDINGS_MAGIC, path)
    tok = lines[1].split()
    if len(tok) != 3:
        raise DataError(f"{path}:2: expected 'N C modality'")
    try:
        n, c = int(tok[0]), int(tok[1])
    except ValueError as exc:
        raise DataError(f"{path}:2: {exc}") from exc
    modality = tok[2]
    if modality not in MODALITIES:
        raise DataError(f"{path}:2: unknown modality {modality!r}")
    if len(lines) - 2 != n:
        raise DataError(f"{path}: expected {n} rows, got {len(lines) - 2}")
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        try:
            row = [float(v) for v in line.split()]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        if len(row) != c:
            raise DataError(f"{path}:{lineno}: expected {c} values, got {len(row)}")
        rows.append(row)
    return EmbeddingBatch(np.asarray(rows, dtype=np.float64), modality)


def write_logits(path, ids, labels, records) -> None:
    """Write per-sample logits records; labels may contain None."""
    records = list(records)
    if not records:
        raise DataError("no logits records to write")
    if len(ids) != len(records) or len(labels) != len(records):
        raise DataError("ids and labels must align with the records")
    k = records[0].num_classes
    lines = [_header(LOGITS_MAGIC), f"{len(records)} {k}"]
    for sid, label, rec in zip(ids, labels, records):
        if rec.num_classes != k:
            raise DataError("all records must share the class count")
        label_tok = "-" if label is None else str(int(label))
        parts = [
            str(sid),
            label_tok,
            _fmt_floats(rec.logits_joints),
            _fmt_floats(rec.logits_bones),
            _fmt_floats(rec.logits_velocities),
            _fmt_floats((rec.dist_joints, rec.dist_bones, rec.dist_velocities)),
        ]
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_logits(path):
    """Read a logits file; returns (ids, labels, records)."""
    lines = _read_lines(path)
    if len(lines) < 2:
        raise DataError(f"{path}: truncated logits file")
    _check_header(lines[0], LOGITS_MAGIC, path)
    tok = lines[1].split()
    if len(tok) != 2:
        raise DataError(f"{path}:2: expected 'N K'")
    try:
        n, k = int(tok[0]), int(tok[1])
    except ValueError as exc:
        raise DataError(f"{path}:2: {exc}") from exc
    if len(lines) - 2 != n:
        raise DataError(f"{path}: expected {n} records, got {len(lines) - 2}")
    ids, labels, records = [], [], []
    width = 2 + 3 * k + 3
    for lineno, line in enumerate(lines[2:], start=3):
        tok = line.split()
        if len(tok) != width:
            raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(tok)}")
        sid, label_tok = tok[0], tok[1]
        try:
            label = None if label_tok == "-" else int(label_tok)
            values = [float(v) for v in tok[2:]]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        rec = LogitsRecord(
            logits_joints=np.asarray(values[:k]),
            logits_bones=np.asarray(values[k : 2 * k]),
            logits_velocities=np.asarray(values[2 * k : 3 * k]),
            dist_joints=values[3 * k],
            dist_bones=values[3 * k + 1],
            dist_velocities=values[3 * k + 2],
        )
        ids.append(sid)
        labels.append(label)
        records.append(rec)
    return ids, labels, records


@dataclass(frozen=True)
class ScoreRow:
    """One row of the scored output table."""

    sample_id: str
    true_label: int
    predicted_class: int
    p_prob: float
    novelty: float


def write_scores(path, rows) -> None:
    buf = io.StringIO()
    buf.write(f"# {_header(SCORES_MAGIC)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "true_label", "predicted_class", "p_prob", "novelty"])
    for r in rows:
        writer.writerow(
            [r.sample_id, r.true_label, r.predicted_class, repr(r.p_prob), repr(r.novelty)]
        )
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_curve(path, points, kind: str) -> None:
    """Write ROC or precision-recall points as CSV with a version comment."""
    if kind not in CURVE_COLUMNS:
        raise DataError(f"unknown curve kind {kind!r}")
    buf = io.StringIO()
    buf.write(f"# {_header(CURVE_MAGIC)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_COLUMNS[kind])
    for x, y in points:
        writer.writerow([repr(float(x)), repr(float(y))])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_curve(path, kind: str) -> list[tuple[float, float]]:
    if kind not in CURVE_COLUMNS:
        raise DataError(f"unknown curve kind {kind!r}")
    lines = _read_lines(path)
    if len(lines) < 2 or not lines[0].startswith("# "):
        raise DataError(f"{path}: missing curve header")
    _check_header(lines[0][2:], CURVE_MAGIC, path)
    reader = csv.reader(lines[1:])
    header = next(reader)
    if header != CURVE_COLUMNS[kind]:
        raise DataError(f"{path}: expected {CURVE_COLUMNS[kind]} columns, got {header}")
    try:
        return [(float(x), float(y)) for x, y in reader]
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def read_scores(path) -> list[ScoreRow]:
    lines = _read_lines(path)
    if len(lines) < 2 or not lines[0].startswith("# "):
        raise DataError(f"{path}: missing score-table header")
    _check_header(lines[0][2:], SCORES_MAGIC, path)
    reader = csv.reader(lines[1:])
    header = next(reader)
    if header != ["id", "true_label", "predicted_class", "p_prob", "novelty"]:
        raise DataError(f"{path}: unexpected column header {header}")
    rows = []
    for lineno, rec in enumerate(reader, start=3):
        if len(rec) != 5:
            raise DataError(f"{path}:{lineno}: expected 5 columns")
        try:
            rows.append(
                ScoreRow(
                    sample_id=rec[0],
                    true_label=int(rec[1]),
                    predicted_class=int(rec[2]),
                    p_prob=float(rec[3]),
                    novelty=float(rec[4]),
                )
            )
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no score rows")
    return rows
