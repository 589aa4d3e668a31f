"""Command-line interface.

One subcommand per pipeline stage (derive, perturb, splits, train, extract,
mmd, score, eval, report) plus ``pipeline`` for the configured end-to-end
sequence.  The flags --config, --seed, --out-dir, and --threads are accepted
by every subcommand.  Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio, pipeline as pl
from .errors import ConfigError, DataError, NumericError
from .metrics import MetricsReport
from .mmd import EmbeddingBatch, KernelConfig, crossmmd
from .model import (
    ModalityInputs,
    TrainConfig,
    embed,
    extract_embeddings,
    load_checkpoint,
    logits as branch_logits,
    save_checkpoint,
    train,
)
from .scoring import SCORE_VARIANTS, Gallery
from .skeleton import (
    GAUSSIAN_NOISE,
    OCCLUSION,
    PerturbationConfig,
    add_gaussian_noise,
    apply_random_occlusion,
    chain_topology,
    derive_bones,
    derive_velocities,
)
from .splits import generate_split, load_fixture_split, load_manifest, save_manifest

MODALITIES = ("joints", "bones", "velocities")


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=str, default=None, help="pipeline config JSON")
    p.add_argument("--seed", type=int, default=None, help="seed override")
    p.add_argument("--out-dir", type=str, default=None, help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    return p


def _out_dir(args, default=".") -> Path:
    out = Path(args.out_dir) if args.out_dir else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args, default=0) -> int:
    return default if args.seed is None else int(args.seed)


def _add_kernel_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--num-kernels", type=int, default=5)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--bandwidth-floor", type=float, default=1e-8)


def _kernel_from_args(args) -> KernelConfig:
    try:
        return KernelConfig(
            num_kernels=args.num_kernels,
            alpha=args.alpha,
            bandwidth_floor=args.bandwidth_floor,
        )
    except DataError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_derive(args) -> int:
    out = _out_dir(args)
    ids, seqs = fileio.read_skeletons(args.skeletons)
    topo = (
        fileio.read_topology(args.topology)
        if args.topology
        else chain_topology(seqs[0].num_joints)
    )
    joints, bones, velocities = pl.derive_modalities(seqs, topo)
    for name, derived in (("joints", joints), ("bones", bones), ("velocities", velocities)):
        fileio.write_skeletons(out / f"{name}.skel", derived, ids=ids)
    return 0


def cmd_perturb(args) -> int:
    ids, seqs = fileio.read_skeletons(args.skeletons)
    base_seed = _seed(args)
    perturbed = []
    for i, seq in enumerate(seqs):
        cfg = PerturbationConfig(
            kind=args.kind,
            gamma=args.gamma,
            theta_choices=tuple(args.theta or ()),
            seed=base_seed + i,
        )
        if cfg.kind == GAUSSIAN_NOISE:
            perturbed.append(add_gaussian_noise(seq, cfg))
        else:
            perturbed.append(apply_random_occlusion(seq, cfg))
    fileio.write_skeletons(args.out, perturbed, ids=ids)
    return 0


def cmd_splits(args) -> int:
    if args.action == "export":
        split = load_fixture_split(args.dataset, args.run)
    else:
        split = generate_split(args.num_classes, args.num_unseen, seed=_seed(args))
    save_manifest(split, args.out)
    return 0


def _read_modality_files(args) -> tuple[list[str], list, list, list]:
    """Read the three aligned modality skeleton files; validates ids and labels."""
    ids_j, joints = fileio.read_skeletons(args.joints)
    ids_b, bones = fileio.read_skeletons(args.bones)
    ids_v, velocities = fileio.read_skeletons(args.velocities)
    if ids_j != ids_b or ids_j != ids_v:
        raise DataError("modality files disagree on sample ids or order")
    labels_j = [s.label for s in joints]
    if [s.label for s in bones] != labels_j or [s.label for s in velocities] != labels_j:
        raise DataError("modality files disagree on labels")
    return ids_j, joints, bones, velocities


def cmd_train(args) -> int:
    ids, joints, bones, velocities = _read_modality_files(args)
    labels = [s.label for s in joints]
    if any(l is None for l in labels):
        raise DataError("training samples need labels")
    keep = list(range(len(ids)))
    if args.split:
        split = load_manifest(args.split)
        seen = set(split.seen)
        keep = [i for i in keep if labels[i] in seen]
        if not keep:
            raise DataError("no training samples fall in the seen classes")
    class_ids = sorted(set(int(labels[i]) for i in keep))
    lookup = {c: k for k, c in enumerate(class_ids)}
    inputs = pl.modality_inputs(
        [joints[i] for i in keep],
        [bones[i] for i in keep],
        [velocities[i] for i in keep],
        np.asarray([lookup[int(labels[i])] for i in keep], dtype=np.int64),
    )
    try:
        cfg = TrainConfig(
            lambda_mmd=args.lambda_mmd,
            learning_rate=args.learning_rate,
            batch_size=args.batch_size,
            epochs=args.epochs,
            seed=_seed(args),
            hidden=args.hidden,
            kernel=_kernel_from_args(args),
        )
    except DataError as exc:
        raise ConfigError(str(exc)) from exc
    params3, loss_log = train(inputs, cfg)
    save_checkpoint(args.out, params3, cfg, class_ids=class_ids)
    print(f"final loss {loss_log[-1]!r} after {len(loss_log)} epochs")
    return 0


def cmd_extract(args) -> int:
    out = _out_dir(args)
    params3, _, _ = load_checkpoint(args.checkpoint)
    ids, joints, bones, velocities = _read_modality_files(args)
    labels = [s.label for s in joints]
    inputs = pl.modality_inputs(joints, bones, velocities)
    embs = embed(params3, inputs)
    for name, emb in zip(MODALITIES, embs):
        fileio.write_embeddings(out / f"embeddings_{name}.emb", EmbeddingBatch(emb, name))
    if args.write_gallery:
        _, gallery = extract_embeddings(params3, inputs)
        for name in MODALITIES:
            fileio.write_embeddings(
                out / f"gallery_{name}.emb", EmbeddingBatch(gallery.modality(name), name)
            )
    if args.gallery_dir:
        gallery = _load_gallery(Path(args.gallery_dir))
        dists = pl.compute_distances(gallery, embs, args.threads or 1)
        records = pl.build_records(branch_logits(params3, inputs), dists)
        fileio.write_logits(out / "logits.txt", ids, labels, records)
    return 0


def _load_gallery(gallery_dir: Path) -> Gallery:
    mats = {}
    for name in MODALITIES:
        path = gallery_dir / f"gallery_{name}.emb"
        batch = fileio.read_embeddings(path)
        if batch.modality != name:
            raise DataError(f"{path}: modality mismatch ({batch.modality!r})")
        mats[name] = batch.data
    return Gallery(mats["joints"], mats["bones"], mats["velocities"])


def cmd_mmd(args) -> int:
    batches = []
    for name, path in (("joints", args.joints), ("bones", args.bones), ("velocities", args.velocities)):
        batch = fileio.read_embeddings(path)
        if batch.modality != name:
            raise DataError(f"{path}: expected modality {name!r}, got {batch.modality!r}")
        batches.append(batch)
    value = crossmmd(*batches, _kernel_from_args(args))
    print(repr(value))
    return 0


def cmd_score(args) -> int:
    ids, labels, records = fileio.read_logits(args.logits)
    if any(l is None for l in labels):
        raise DataError("score needs labeled logits records")
    emb_args = (args.joints, args.bones, args.velocities)
    if args.gallery_dir or any(emb_args):
        if not (args.gallery_dir and all(emb_args)):
            raise ConfigError(
                "distance recomputation needs --gallery-dir and all three embedding files"
            )
        gallery = _load_gallery(Path(args.gallery_dir))
        embs = []
        for name, path in zip(MODALITIES, emb_args):
            batch = fileio.read_embeddings(path)
            if batch.modality != name:
                raise DataError(f"{path}: expected modality {name!r}")
            embs.append(batch.data)
        dists = pl.compute_distances(gallery, tuple(embs), args.threads or 1)
        records = pl.build_records(
            (
                np.stack([r.logits_joints for r in records]),
                np.stack([r.logits_bones for r in records]),
                np.stack([r.logits_velocities for r in records]),
            ),
            dists,
        )
    variant = args.variant
    if variant == "crossmax" and args.no_refine:
        variant = "vanilla_softmax"
    k = records[0].num_classes
    class_ids = _checkpoint_class_ids(args.checkpoint, k) if args.checkpoint else list(range(k))
    rows = pl.score_records(records, ids, labels, class_ids, variant)
    fileio.write_scores(args.out, rows)
    return 0


def _checkpoint_class_ids(path, k: int) -> list[int]:
    _, _, class_ids = load_checkpoint(path)
    if class_ids is None or len(class_ids) != k:
        raise DataError(f"checkpoint {path} does not carry {k} class ids")
    return class_ids


def cmd_eval(args) -> int:
    out = _out_dir(args)
    rows = fileio.read_scores(args.scores)
    split = load_manifest(args.split)
    metrics = pl.evaluate_rows(rows, split)
    paths = {
        "scores": os.path.relpath(args.scores, out),
        "split": os.path.relpath(args.split, out),
    }
    if metrics.report is not None:
        fileio.write_curve(out / "roc.csv", metrics.report.roc_points, "roc")
        fileio.write_curve(out / "pr.csv", metrics.report.pr_points, "pr")
        paths["roc"] = "roc.csv"
        paths["pr"] = "pr.csv"
    doc = {
        "format": pl.METRICS_FORMAT,
        "version": pl.METRICS_VERSION,
        "config": {
            "command": "eval",
            "scores": str(args.scores),
            "split": str(args.split),
        },
        "runs": [
            {
                "run_id": split.run_id,
                "seed": split.seed,
                "o_auroc": metrics.o_auroc,
                "o_aupr": metrics.o_aupr,
                "c_acc": metrics.c_acc,
                "paths": paths,
            }
        ],
        "mean": {
            "o_auroc": metrics.o_auroc,
            "o_aupr": metrics.o_aupr,
            "c_acc": metrics.c_acc,
        },
    }
    (out / "metrics.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(doc["mean"]))
    return 0


def cmd_report(args) -> int:
    metrics_path = Path(args.metrics)
    plots_dir = Path(args.out_dir) if args.out_dir else metrics_path.parent / "plots"
    written = pl.render_plots(metrics_path, plots_dir)
    print(f"wrote {len(written)} figures to {plots_dir}")
    return 0


def cmd_pipeline(args) -> int:
    if not args.config:
        raise ConfigError("pipeline needs --config")
    cfg = pl.load_config(
        args.config, out_dir=args.out_dir, seed=args.seed, threads=args.threads
    )
    result = pl.run_pipeline(cfg)
    print(json.dumps(result.mean))
    return 0


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags()
    parser = argparse.ArgumentParser(
        prog="crossmax",
        description="Cross-modality open-set recognition toolkit for skeleton action data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", parents=[flags], help="derive bone and velocity modalities")
    p.add_argument("--skeletons", required=True)
    p.add_argument("--topology", default=None)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("perturb", parents=[flags], help="apply noise or occlusion")
    p.add_argument("--skeletons", required=True)
    p.add_argument("--kind", choices=[GAUSSIAN_NOISE, OCCLUSION], required=True)
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--theta", type=float, action="append", help="occlusion ratio (repeatable)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("splits", help="export or generate split manifests")
    action = p.add_subparsers(dest="action", required=True)
    pe = action.add_parser("export", parents=[flags])
    pe.add_argument("--dataset", required=True)
    pe.add_argument("--run", type=int, required=True)
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_splits)
    pg = action.add_parser("generate", parents=[flags])
    pg.add_argument("--num-classes", type=int, required=True)
    pg.add_argument("--num-unseen", type=int, required=True)
    pg.add_argument("--out", required=True)
    pg.set_defaults(func=cmd_splits)

    p = sub.add_parser("train", parents=[flags], help="train the three-branch model")
    for name in MODALITIES:
        p.add_argument(f"--{name}", required=True)
    p.add_argument("--split", default=None, help="manifest restricting to seen classes")
    p.add_argument("--lambda-mmd", type=float, default=0.1)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--hidden", type=int, default=32)
    _add_kernel_flags(p)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", parents=[flags], help="extract embeddings and logits")
    p.add_argument("--checkpoint", required=True)
    for name in MODALITIES:
        p.add_argument(f"--{name}", required=True)
    p.add_argument("--write-gallery", action="store_true")
    p.add_argument("--gallery-dir", default=None, help="gallery to score distances against")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("mmd", parents=[flags], help="print the cross-modality discrepancy")
    for name in MODALITIES:
        p.add_argument(f"--{name}", required=True)
    _add_kernel_flags(p)
    p.set_defaults(func=cmd_mmd)

    p = sub.add_parser("score", parents=[flags], help="score logits records")
    p.add_argument("--logits", required=True)
    p.add_argument("--gallery-dir", default=None)
    for name in MODALITIES:
        p.add_argument(f"--{name}", default=None, help=f"test {name} embedding file")
    p.add_argument("--variant", choices=list(SCORE_VARIANTS), default="crossmax")
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--checkpoint", default=None, help="map classes back to original labels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", parents=[flags], help="metrics from a score table")
    p.add_argument("--scores", required=True)
    p.add_argument("--split", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", parents=[flags], help="render SVG figures")
    p.add_argument("--metrics", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", parents=[flags], help="run the configured pipeline")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
