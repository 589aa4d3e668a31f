"""End-to-end evaluation pipeline and report emission.

A pipeline run executes, per evaluation run (seed): obtain data, fix the
seen/unseen split, optionally perturb the raw sequences, derive the three
modalities, train the branch model on train-seen samples, extract embeddings
and gallery, score the test set under the configured variant, and evaluate.
Intermediates are persisted as versioned text files inside
``out_dir/run_<id>/``; the aggregate report (metrics JSON, curve CSVs, SVG
plots) is written by :func:`emit_report`.

Every run is a pure function of the resolved configuration, so re-running
with the same config reproduces every output byte for byte.  Perturbations
are applied to the raw joint sequences before modality derivation, matching
the ablation protocol (noise and occlusion act on the skeleton sequence
itself, with the derived modalities inheriting the disturbance).
"""

from __future__ import annotations

import json
import shutil
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fileio
from .errors import ConfigError, CrossMaxError, DataError
from .metrics import LabeledScore, MetricsReport, c_acc, evaluate
from .mmd import EmbeddingBatch, KernelConfig
from .model import (
    ModalityInputs,
    TrainConfig,
    embed,
    extract_embeddings,
    flatten_sequences,
    load_checkpoint,
    logits as branch_logits,
    save_checkpoint,
    train,
)
from .report import save_curve, save_probability_histogram, save_radar
from .scoring import (
    SCORE_VARIANTS,
    Gallery,
    LogitsRecord,
    gallery_distances,
    variant_score,
)
from .skeleton import (
    BoneTopology,
    PerturbationConfig,
    SkeletonSequence,
    add_gaussian_noise,
    apply_random_occlusion,
    chain_topology,
    derive_bones,
    derive_velocities,
)
from .splits import SplitSpec, generate_split, load_fixture_split, load_manifest, partition, save_manifest
from .synthetic import SkeletonDataset, gaussian_cluster_skeletons

CONFIG_FORMAT = "crossmax-config"
CONFIG_VERSION = 1
METRICS_FORMAT = "crossmax-metrics"
METRICS_VERSION = 1

MODALITY_NAMES = ("joints", "bones", "velocities")


@dataclass(frozen=True)
class RunSpec:
    run_id: int
    seed: int


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved pipeline configuration plus its JSON echo."""

    kernel: KernelConfig
    train: TrainConfig
    data: dict
    split: dict
    runs: tuple[RunSpec, ...]
    score_variant: str = "crossmax"
    refinement_enabled: bool = True
    perturb: dict | None = None
    out_dir: str = "out"
    threads: int = 1
    echo: dict = field(default_factory=dict)

    @property
    def effective_variant(self) -> str:
        if self.score_variant == "crossmax" and not self.refinement_enabled:
            return "vanilla_softmax"
        return self.score_variant


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def load_config(source, out_dir=None, seed=None, threads=None) -> PipelineConfig:
    """Parse a pipeline config from a JSON file path or a dict.

    ``out_dir``, ``seed``, and ``threads`` override the config when given.
    With no explicit ``runs`` list, ``num_runs`` runs are derived from the
    master seed as ``seed * 1000 + run_id``.
    """
    if isinstance(source, (str, Path)):
        try:
            doc = json.loads(Path(source).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config JSON {source}: {exc}") from exc
    else:
        doc = dict(source)
    _expect(isinstance(doc, dict), "config must be a JSON object")
    _expect(doc.get("format") == CONFIG_FORMAT, f"config format must be {CONFIG_FORMAT!r}")
    _expect(doc.get("version") == CONFIG_VERSION, f"config version must be {CONFIG_VERSION}")

    known = {
        "format", "version", "out_dir", "threads", "seed", "num_runs", "runs",
        "refinement_enabled", "score_variant", "kernel", "train", "data",
        "split", "perturb",
    }
    unknown = set(doc) - known
    _expect(not unknown, f"unknown config keys: {sorted(unknown)}")

    try:
        kernel = KernelConfig(**doc.get("kernel", {}))
        train_doc = dict(doc.get("train", {}))
        if "lr_decay_steps" in train_doc:
            train_doc["lr_decay_steps"] = tuple(train_doc["lr_decay_steps"])
        train_cfg = TrainConfig(kernel=kernel, **train_doc)
    except (TypeError, CrossMaxError) as exc:
        raise ConfigError(f"bad kernel/train settings: {exc}") from exc

    data = doc.get("data")
    _expect(isinstance(data, dict) and "kind" in data, "config needs a data section with a kind")
    _expect(data["kind"] in ("synthetic", "files"), f"unknown data kind {data['kind']!r}")
    split = doc.get("split")
    _expect(isinstance(split, dict) and "kind" in split, "config needs a split section with a kind")
    _expect(
        split["kind"] in ("generate", "fixture", "manifest"),
        f"unknown split kind {split['kind']!r}",
    )

    variant = doc.get("score_variant", "crossmax")
    _expect(variant in SCORE_VARIANTS, f"unknown score variant {variant!r}")

    master_seed = int(doc.get("seed", 0)) if seed is None else int(seed)
    if "runs" in doc:
        _expect(isinstance(doc["runs"], list) and doc["runs"], "runs must be a nonempty list")
        runs = tuple(RunSpec(int(r["run_id"]), int(r["seed"])) for r in doc["runs"])
    else:
        num_runs = int(doc.get("num_runs", 5))
        _expect(1 <= num_runs <= 5, "num_runs must be in 1..5")
        runs = tuple(RunSpec(i, master_seed * 1000 + i) for i in range(1, num_runs + 1))
    _expect(len({r.run_id for r in runs}) == len(runs), "run ids must be unique")

    perturb = doc.get("perturb")
    if perturb is not None:
        _expect(isinstance(perturb, dict) and "kind" in perturb, "perturb needs a kind")

    resolved_out = str(out_dir) if out_dir is not None else str(doc.get("out_dir", "out"))
    resolved_threads = int(threads) if threads is not None else int(doc.get("threads", 1))
    _expect(resolved_threads >= 1, "threads must be >= 1")

    echo = dict(doc)
    echo["out_dir"] = resolved_out
    echo["threads"] = resolved_threads
    echo["seed"] = master_seed
    echo["runs"] = [{"run_id": r.run_id, "seed": r.seed} for r in runs]

    return PipelineConfig(
        kernel=kernel,
        train=train_cfg,
        data=dict(data),
        split=dict(split),
        runs=runs,
        score_variant=variant,
        refinement_enabled=bool(doc.get("refinement_enabled", True)),
        perturb=None if perturb is None else dict(perturb),
        out_dir=resolved_out,
        threads=resolved_threads,
        echo=echo,
    )


@dataclass
class RunMetrics:
    """Headline numbers for one run; open-set metrics are None without unseen samples."""

    o_auroc: float | None
    o_aupr: float | None
    c_acc: float
    report: MetricsReport | None


@dataclass
class RunResult:
    run_id: int
    seed: int
    split: SplitSpec
    rows: list[fileio.ScoreRow]
    metrics: RunMetrics
    run_dir: Path


@dataclass
class PipelineResult:
    config_echo: dict
    runs: list[RunResult]
    mean: dict


@contextmanager
def _stage(name: str, created: list[Path]):
    """Tag failures with the stage name and remove the stage's partial outputs."""
    try:
        yield created
    except CrossMaxError as exc:
        _cleanup(created)
        raise type(exc)(f"[stage {name}] {exc}") from exc
    except Exception:
        _cleanup(created)
        raise


def _cleanup(paths: list[Path]) -> None:
    for p in paths:
        try:
            if p.is_dir():
                shutil.rmtree(p)
            elif p.exists():
                p.unlink()
        except OSError:
            pass


def _load_dataset(cfg: PipelineConfig, run: RunSpec) -> SkeletonDataset:
    d = cfg.data
    if d["kind"] == "synthetic":
        try:
            return gaussian_cluster_skeletons(
                num_classes=int(d["num_classes"]),
                train_per_class=int(d["train_per_class"]),
                test_per_class=int(d["test_per_class"]),
                frames=int(d.get("frames", 8)),
                joints=int(d.get("joints", 5)),
                class_scale=float(d.get("class_scale", 1.5)),
                noise_scale=float(d.get("noise_scale", 0.25)),
                seed=run.seed,
            )
        except KeyError as exc:
            raise ConfigError(f"synthetic data config missing {exc.args[0]!r}") from exc
    for key in ("train_skeletons", "test_skeletons"):
        if key not in d:
            raise ConfigError(f"files data config missing {key!r}")
    sequences: list[SkeletonSequence] = []
    labels: list[int] = []
    flags: list[bool] = []
    for key, flag in (("train_skeletons", True), ("test_skeletons", False)):
        _, seqs = fileio.read_skeletons(d[key])
        for seq in seqs:
            if seq.label is None:
                raise DataError(f"{d[key]}: every sample needs a label")
            sequences.append(seq)
            labels.append(seq.label)
            flags.append(flag)
    return SkeletonDataset(sequences, np.asarray(labels), np.asarray(flags))


def _make_split(cfg: PipelineConfig, run: RunSpec, num_classes: int) -> SplitSpec:
    s = cfg.split
    if s["kind"] == "generate":
        try:
            num_unseen = int(s["num_unseen"])
        except KeyError as exc:
            raise ConfigError("generate split needs num_unseen") from exc
        return generate_split(
            num_classes, num_unseen, seed=run.seed,
            dataset_name=s.get("dataset_name", "synthetic"), run_id=run.run_id,
        )
    if s["kind"] == "fixture":
        try:
            return load_fixture_split(s["dataset"], run.run_id)
        except KeyError as exc:
            raise ConfigError("fixture split needs a dataset") from exc
    try:
        return load_manifest(s["path"])
    except KeyError as exc:
        raise ConfigError("manifest split needs a path") from exc


def _perturb_config(doc: dict, sample_seed: int) -> PerturbationConfig:
    return PerturbationConfig(
        kind=doc["kind"],
        gamma=float(doc.get("gamma", 0.0)),
        theta_choices=tuple(doc.get("theta_choices", ())),
        seed=sample_seed,
    )


def perturb_sequences(sequences, doc: dict, base_seed: int):
    """Apply the configured perturbation with per-sample derived seeds."""
    out = []
    for i, seq in enumerate(sequences):
        cfg = _perturb_config(doc, base_seed + i)
        if cfg.kind == "gaussian_noise":
            out.append(add_gaussian_noise(seq, cfg))
        else:
            out.append(apply_random_occlusion(seq, cfg))
    return out


def derive_modalities(sequences, topo: BoneTopology):
    """Joints, bones, and velocities views of each sequence."""
    joints = list(sequences)
    bones = [derive_bones(s, topo) for s in sequences]
    velocities = [derive_velocities(s) for s in sequences]
    return joints, bones, velocities


def modality_inputs(joints, bones, velocities, labels=None) -> ModalityInputs:
    return ModalityInputs(
        flatten_sequences(joints),
        flatten_sequences(bones),
        flatten_sequences(velocities),
        labels,
    )


def compute_distances(gallery: Gallery, embs, threads: int = 1) -> np.ndarray:
    """Per-sample CNE distances, optionally parallelized over samples."""
    if threads <= 1:
        return gallery_distances(gallery, *embs)
    n = embs[0].shape[0]
    chunks = np.array_split(np.arange(n), threads)
    chunks = [c for c in chunks if c.size]

    def work(idx):
        return gallery_distances(gallery, embs[0][idx], embs[1][idx], embs[2][idx])

    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(work, chunks))
    return np.concatenate(parts, axis=0)


def build_records(logit_triples, dists) -> list[LogitsRecord]:
    """Assemble per-sample records from branch logits and distance rows."""
    lj, lb, lv = logit_triples
    records = []
    for i in range(lj.shape[0]):
        records.append(
            LogitsRecord(
                logits_joints=lj[i],
                logits_bones=lb[i],
                logits_velocities=lv[i],
                dist_joints=float(dists[i, 0]),
                dist_bones=float(dists[i, 1]),
                dist_velocities=float(dists[i, 2]),
            )
        )
    return records


def score_records(records, ids, true_labels, class_ids, variant: str) -> list[fileio.ScoreRow]:
    """Variant scoring of per-sample records into score-table rows.

    ``class_ids`` maps model class indices back to original labels.
    """
    rows = []
    for rec, sid, true_label in zip(records, ids, true_labels):
        pred, p = variant_score(rec, variant)
        rows.append(
            fileio.ScoreRow(
                sample_id=str(sid),
                true_label=int(true_label),
                predicted_class=int(class_ids[pred]),
                p_prob=float(p),
                novelty=float(1.0 - p),
            )
        )
    return rows


def evaluate_rows(rows, split: SplitSpec) -> RunMetrics:
    """Open-set metrics for one scored run; seen membership comes from the split."""
    seen_set = set(split.seen)
    labeled = [
        LabeledScore(
            score=r.p_prob,
            is_seen=r.true_label in seen_set,
            predicted_class=r.predicted_class,
            true_class=r.true_label,
        )
        for r in rows
    ]
    has_unseen = any(not s.is_seen for s in labeled)
    if has_unseen:
        rep = evaluate(labeled)
        return RunMetrics(rep.o_auroc, rep.o_aupr, rep.c_acc, rep)
    return RunMetrics(None, None, c_acc(labeled), None)


def _remap_labels(labels: np.ndarray, class_ids) -> np.ndarray:
    lookup = {int(c): i for i, c in enumerate(class_ids)}
    try:
        return np.asarray([lookup[int(v)] for v in labels], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"label {exc.args[0]} outside the seen classes") from exc


def _run_one(cfg: PipelineConfig, run: RunSpec, out_root: Path) -> RunResult:
    run_dir = out_root / f"run_{run.run_id}"
    run_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    with _stage("data", created):
        dataset = _load_dataset(cfg, run)
        num_classes = int(dataset.labels.max()) + 1

    with _stage("split", created) as made:
        split = _make_split(cfg, run, num_classes)
        split_path = run_dir / "split.json"
        save_manifest(split, split_path)
        made.append(split_path)
        parts = partition(dataset.labels, dataset.is_train, split)
        if parts.train_seen.size == 0 or parts.test_seen.size == 0:
            raise DataError("split leaves no train-seen or test-seen samples")

    with _stage("perturb", created):
        sequences = dataset.sequences
        if cfg.perturb is not None:
            sequences = perturb_sequences(
                sequences, cfg.perturb, int(cfg.perturb.get("seed", 0))
            )

    with _stage("derive", created) as made:
        num_joints = sequences[0].num_joints
        topo = (
            fileio.read_topology(cfg.data["topology"])
            if cfg.data.get("topology")
            else chain_topology(num_joints)
        )
        joints, bones, velocities = derive_modalities(sequences, topo)
        test_idx = np.concatenate([parts.test_seen, parts.test_unseen])
        by_mod = {"joints": joints, "bones": bones, "velocities": velocities}
        for name, seqs in by_mod.items():
            for prefix, idx in (("train", parts.train_seen), ("test", test_idx)):
                path = run_dir / f"{prefix}_{name}.skel"
                fileio.write_skeletons(
                    path, [seqs[i] for i in idx], ids=[f"s{i}" for i in idx]
                )
                made.append(path)

    with _stage("train", created) as made:
        class_ids = list(split.seen)
        train_inputs = modality_inputs(
            [joints[i] for i in parts.train_seen],
            [bones[i] for i in parts.train_seen],
            [velocities[i] for i in parts.train_seen],
            _remap_labels(dataset.labels[parts.train_seen], class_ids),
        )
        train_cfg = TrainConfig(
            lambda_mmd=cfg.train.lambda_mmd,
            learning_rate=cfg.train.learning_rate,
            batch_size=cfg.train.batch_size,
            epochs=cfg.train.epochs,
            seed=cfg.train.seed + run.seed,
            hidden=cfg.train.hidden,
            kernel=cfg.kernel,
            lr_decay_rate=cfg.train.lr_decay_rate,
            lr_decay_steps=cfg.train.lr_decay_steps,
        )
        params3, _ = train(train_inputs, train_cfg)
        ckpt_path = run_dir / "checkpoint.json"
        save_checkpoint(ckpt_path, params3, train_cfg, class_ids=class_ids)
        made.append(ckpt_path)

    with _stage("extract", created) as made:
        _, gallery = extract_embeddings(params3, train_inputs)
        for name in MODALITY_NAMES:
            path = run_dir / f"gallery_{name}.emb"
            fileio.write_embeddings(path, EmbeddingBatch(gallery.modality(name), name))
            made.append(path)
        test_inputs = modality_inputs(
            [joints[i] for i in test_idx],
            [bones[i] for i in test_idx],
            [velocities[i] for i in test_idx],
        )
        test_embs = embed(params3, test_inputs)
        for name, emb in zip(MODALITY_NAMES, test_embs):
            path = run_dir / f"test_embeddings_{name}.emb"
            fileio.write_embeddings(path, EmbeddingBatch(emb, name))
            made.append(path)
        dists = compute_distances(gallery, test_embs, cfg.threads)
        records = build_records(branch_logits(params3, test_inputs), dists)
        test_ids = [f"s{i}" for i in test_idx]
        test_labels = [int(dataset.labels[i]) for i in test_idx]
        logits_path = run_dir / "logits.txt"
        fileio.write_logits(logits_path, test_ids, test_labels, records)
        made.append(logits_path)

    with _stage("score", created) as made:
        rows = score_records(records, test_ids, test_labels, class_ids, cfg.effective_variant)
        scores_path = run_dir / "scores.csv"
        fileio.write_scores(scores_path, rows)
        made.append(scores_path)

    with _stage("eval", created):
        metrics = evaluate_rows(rows, split)

    return RunResult(
        run_id=run.run_id,
        seed=run.seed,
        split=split,
        rows=rows,
        metrics=metrics,
        run_dir=run_dir,
    )


def _mean_or_none(values) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Execute every configured run and emit the aggregate report."""
    out_root = Path(cfg.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "config.json").write_text(
        json.dumps(cfg.echo, indent=2) + "\n", encoding="utf-8"
    )
    results = [_run_one(cfg, run, out_root) for run in cfg.runs]
    mean = {
        "o_auroc": _mean_or_none([r.metrics.o_auroc for r in results]),
        "o_aupr": _mean_or_none([r.metrics.o_aupr for r in results]),
        "c_acc": _mean_or_none([r.metrics.c_acc for r in results]),
    }
    result = PipelineResult(config_echo=cfg.echo, runs=results, mean=mean)
    emit_report(result, out_root)
    return result


def emit_report(result: PipelineResult, out_dir) -> list[Path]:
    """Write the metrics JSON, per-run curve CSVs, and SVG plots.

    Returns the list of files written.
    """
    if not result.runs:
        raise DataError("report needs at least one run result")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    run_docs = []
    for r in result.runs:
        rel = r.run_dir.name
        paths = {"scores": f"{rel}/scores.csv", "split": f"{rel}/split.json"}
        if r.metrics.report is not None:
            roc_path = r.run_dir / "roc.csv"
            pr_path = r.run_dir / "pr.csv"
            fileio.write_curve(roc_path, r.metrics.report.roc_points, "roc")
            fileio.write_curve(pr_path, r.metrics.report.pr_points, "pr")
            written += [roc_path, pr_path]
            paths["roc"] = f"{rel}/roc.csv"
            paths["pr"] = f"{rel}/pr.csv"
        run_docs.append(
            {
                "run_id": r.run_id,
                "seed": r.seed,
                "o_auroc": r.metrics.o_auroc,
                "o_aupr": r.metrics.o_aupr,
                "c_acc": r.metrics.c_acc,
                "paths": paths,
            }
        )
    doc = {
        "format": METRICS_FORMAT,
        "version": METRICS_VERSION,
        "config": result.config_echo,
        "runs": run_docs,
        "mean": result.mean,
    }
    metrics_path = out_dir / "metrics.json"
    metrics_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    written.append(metrics_path)
    written += render_plots(metrics_path, out_dir / "plots")
    return written


def render_plots(metrics_path, plots_dir) -> list[Path]:
    """Regenerate the SVG figures referenced by a metrics JSON file."""
    metrics_path = Path(metrics_path)
    try:
        doc = json.loads(metrics_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read metrics {metrics_path}: {exc}") from exc
    if doc.get("format") != METRICS_FORMAT or doc.get("version") != METRICS_VERSION:
        raise DataError(f"unsupported metrics header in {metrics_path}")
    base = metrics_path.parent
    plots_dir = Path(plots_dir)
    plots_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    for run in doc["runs"]:
        rid = run["run_id"]
        rows = fileio.read_scores(base / run["paths"]["scores"])
        split = load_manifest(base / run["paths"]["split"])
        seen_set = set(split.seen)
        seen_scores = [r.p_prob for r in rows if r.true_label in seen_set]
        unseen_scores = [r.p_prob for r in rows if r.true_label not in seen_set]
        hist_path = plots_dir / f"histogram_run_{rid}.svg"
        save_probability_histogram(
            hist_path, seen_scores, unseen_scores, title=f"run {rid} open-set probability"
        )
        written.append(hist_path)
        for kind in ("roc", "pr"):
            if kind in run["paths"]:
                points = fileio.read_curve(base / run["paths"][kind], kind)
                curve_path = plots_dir / f"{kind}_run_{rid}.svg"
                save_curve(curve_path, points, kind, title=f"run {rid} {kind.upper()}")
                written.append(curve_path)

    run_labels = [f"R{run['run_id']}" for run in doc["runs"]]
    for metric in ("o_auroc", "o_aupr", "c_acc"):
        values = [run[metric] for run in doc["runs"]]
        if all(v is not None for v in values):
            radar_path = plots_dir / f"radar_{metric}.svg"
            save_radar(radar_path, {metric: values}, run_labels, title=f"per-run {metric}")
            written.append(radar_path)
    return written
