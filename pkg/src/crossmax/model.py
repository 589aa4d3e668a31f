"""Desk-scale three-branch classifier trained with the discrepancy loss.

One two-layer rectifier branch per modality (joints / bones / velocities)
maps a flattened sequence to a hidden embedding and class logits.  The
training objective is the sum of the three per-branch cross-entropies plus a
weighted cross-modality discrepancy on the penultimate embeddings, optimized
by plain seeded gradient descent with hand-derived gradients.  All training
state is a pure function of (dataset, config).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NumericError
from .mmd import EmbeddingBatch, KernelConfig, block_bandwidths, crossmmd, crossmmd_grad
from .scoring import Gallery

CHECKPOINT_FORMAT = "crossmax-checkpoint"
CHECKPOINT_VERSION = 1

BRANCH_NAMES = ("joints", "bones", "velocities")


@dataclass
class BranchParams:
    """Two-layer affine parameters for one modality branch.

    Also serves as the container for same-shaped gradients.
    """

    w1: np.ndarray  # (C_in, H)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H, K)
    b2: np.ndarray  # (K,)

    def validate(self) -> None:
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise DataError("weight matrices must be 2-D")
        if self.w1.shape[1] != self.w2.shape[0]:
            raise DataError("hidden sizes of the two layers disagree")
        if self.b1.shape != (self.w1.shape[1],) or self.b2.shape != (self.w2.shape[1],):
            raise DataError("bias shapes do not match the weights")
        for a in (self.w1, self.b1, self.w2, self.b2):
            if not np.isfinite(a).all():
                raise DataError("parameters must be finite")


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters.

    ``lr_decay_rate``/``lr_decay_steps`` mirror a step-wise schedule but
    default to no decay; the default loss weight follows the reference
    setting of 0.1.
    """

    lambda_mmd: float = 0.1
    learning_rate: float = 0.1
    batch_size: int = 64
    epochs: int = 100
    seed: int = 0
    hidden: int = 32
    kernel: KernelConfig = field(default_factory=KernelConfig)
    lr_decay_rate: float = 1.0
    lr_decay_steps: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.lambda_mmd < 0:
            raise DataError("loss weight must be >= 0")
        if not self.learning_rate > 0:
            raise DataError("learning rate must be > 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise DataError("batch size and epochs must be >= 1")
        if self.hidden < 2:
            raise DataError("hidden width must be >= 2")
        object.__setattr__(self, "lr_decay_steps", tuple(int(s) for s in self.lr_decay_steps))


@dataclass(frozen=True)
class ModalityInputs:
    """Aligned flattened inputs for the three branches, plus optional labels."""

    joints: np.ndarray
    bones: np.ndarray
    velocities: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        mats = []
        for name in BRANCH_NAMES:
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.ndim != 2 or m.shape[0] < 1:
                raise DataError(f"{name} inputs must be a nonempty (N, C) matrix")
            mats.append(m)
            object.__setattr__(self, name, m)
        n = mats[0].shape[0]
        if any(m.shape[0] != n for m in mats):
            raise DataError("modality inputs must share the sample count")
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (n,):
                raise DataError("labels must align with the inputs")
            object.__setattr__(self, "labels", labels)

    @property
    def num_samples(self) -> int:
        return self.joints.shape[0]

    def take(self, idx) -> "ModalityInputs":
        labels = None if self.labels is None else self.labels[idx]
        return ModalityInputs(self.joints[idx], self.bones[idx], self.velocities[idx], labels)


def flatten_sequences(sequences) -> np.ndarray:
    """Row-major flatten of (T, N, 3) sequences into an (N_samples, C) matrix."""
    rows = [np.asarray(s.coords, dtype=np.float64).reshape(-1) for s in sequences]
    if not rows:
        raise DataError("no sequences to flatten")
    width = rows[0].shape[0]
    if any(r.shape[0] != width for r in rows):
        raise DataError("sequences must share their flattened width")
    return np.stack(rows)


def init_branch(c_in: int, hidden: int, num_classes: int, rng) -> BranchParams:
    """Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
    bound1 = 1.0 / np.sqrt(c_in)
    bound2 = 1.0 / np.sqrt(hidden)
    return BranchParams(
        w1=rng.uniform(-bound1, bound1, size=(c_in, hidden)),
        b1=rng.uniform(-bound1, bound1, size=hidden),
        w2=rng.uniform(-bound2, bound2, size=(hidden, num_classes)),
        b2=rng.uniform(-bound2, bound2, size=num_classes),
    )


def forward(params: BranchParams, x) -> tuple[np.ndarray, np.ndarray]:
    """Embedding and logits for one branch; accepts a vector or an (N, C) batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.w1.shape[0]:
        raise DataError(
            f"input width {x.shape[-1]} does not match branch C_in {params.w1.shape[0]}"
        )
    pre = x @ params.w1 + params.b1
    emb = np.maximum(pre, 0.0)
    logits = emb @ params.w2 + params.b2
    return emb, logits


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of the labels under softmax logits."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise DataError("label out of range for the logits width")
    logp = _log_softmax(np.asarray(logits, dtype=np.float64))
    return float(-logp[np.arange(labels.shape[0]), labels].mean())


def _embedding_batches(embs) -> tuple[EmbeddingBatch, EmbeddingBatch, EmbeddingBatch]:
    return tuple(EmbeddingBatch(e, m) for e, m in zip(embs, BRANCH_NAMES))


def total_loss(
    batch: ModalityInputs,
    params3,
    cfg: TrainConfig,
    mmd_bandwidths=None,
) -> float:
    """Sum of the three branch cross-entropies plus the weighted discrepancy.

    ``mmd_bandwidths`` freezes the discrepancy bandwidths (the stop-gradient
    convention used by gradient checks); by default they are recomputed from
    the current embeddings.
    """
    if batch.labels is None:
        raise DataError("training batches need labels")
    embs, logit_list = [], []
    for params, name in zip(params3, BRANCH_NAMES):
        emb, logits = forward(params, getattr(batch, name))
        embs.append(emb)
        logit_list.append(logits)
    loss = sum(cross_entropy(lg, batch.labels) for lg in logit_list)
    if cfg.lambda_mmd > 0 and batch.num_samples >= 2:
        zj, zb, zv = _embedding_batches(embs)
        loss += cfg.lambda_mmd * crossmmd(zj, zb, zv, cfg.kernel, mmd_bandwidths)
    return float(loss)


def backward(batch: ModalityInputs, params3, cfg: TrainConfig):
    """Loss and full analytic gradients for the three branches.

    The discrepancy term differentiates through the kernel blocks with the
    bandwidths held fixed, chained through the rectifier layers.  Batches
    with fewer than two samples skip the discrepancy (it needs a pair).
    """
    if batch.labels is None:
        raise DataError("training batches need labels")
    n = batch.num_samples
    pres, embs, logit_list = [], [], []
    for params, name in zip(params3, BRANCH_NAMES):
        x = getattr(batch, name)
        pre = x @ params.w1 + params.b1
        emb = np.maximum(pre, 0.0)
        pres.append(pre)
        embs.append(emb)
        logit_list.append(emb @ params.w2 + params.b2)

    loss = sum(cross_entropy(lg, batch.labels) for lg in logit_list)
    use_mmd = cfg.lambda_mmd > 0 and n >= 2
    demb_mmd = (0.0, 0.0, 0.0)
    if use_mmd:
        zj, zb, zv = _embedding_batches(embs)
        bws = block_bandwidths(zj, zb, zv, cfg.kernel)
        loss += cfg.lambda_mmd * crossmmd(zj, zb, zv, cfg.kernel, bws)
        demb_mmd = crossmmd_grad(zj, zb, zv, cfg.kernel, bws)

    grads = []
    onehot_rows = np.arange(n)
    for i, (params, name) in enumerate(zip(params3, BRANCH_NAMES)):
        probs = np.exp(_log_softmax(logit_list[i]))
        dlogits = probs
        dlogits[onehot_rows, batch.labels] -= 1.0
        dlogits /= n
        demb = dlogits @ params.w2.T
        if use_mmd:
            demb = demb + cfg.lambda_mmd * demb_mmd[i]
        dpre = demb * (pres[i] > 0.0)
        x = getattr(batch, name)
        grads.append(
            BranchParams(
                w1=x.T @ dpre,
                b1=dpre.sum(axis=0),
                w2=embs[i].T @ dlogits,
                b2=dlogits.sum(axis=0),
            )
        )
    return float(loss), tuple(grads)


def train(dataset: ModalityInputs, cfg: TrainConfig):
    """Seeded gradient descent; returns the branch parameters and a loss log.

    The log holds the full-dataset loss after every epoch.  Optional
    step-wise decay multiplies the learning rate by ``lr_decay_rate`` at each
    epoch index in ``lr_decay_steps``.
    """
    if dataset.labels is None or dataset.num_samples == 0:
        raise DataError("training needs a nonempty labeled dataset")
    labels = dataset.labels
    if labels.min() < 0:
        raise DataError("labels must be nonnegative")
    num_classes = int(labels.max()) + 1
    if num_classes < 2:
        raise DataError("training needs at least two classes")

    rng = np.random.default_rng(cfg.seed)
    widths = [getattr(dataset, name).shape[1] for name in BRANCH_NAMES]
    params3 = tuple(init_branch(c, cfg.hidden, num_classes, rng) for c in widths)

    lr = cfg.learning_rate
    loss_log = []
    n = dataset.num_samples
    for epoch in range(cfg.epochs):
        if epoch in cfg.lr_decay_steps:
            lr *= cfg.lr_decay_rate
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            _, grads = backward(dataset.take(idx), params3, cfg)
            for params, grad in zip(params3, grads):
                params.w1 -= lr * grad.w1
                params.b1 -= lr * grad.b1
                params.w2 -= lr * grad.w2
                params.b2 -= lr * grad.b2
        epoch_loss = total_loss(dataset, params3, cfg)
        if not np.isfinite(epoch_loss):
            raise NumericError(f"non-finite loss at epoch {epoch}")
        loss_log.append(epoch_loss)
    return params3, loss_log


def embed(params3, inputs: ModalityInputs):
    """Penultimate embeddings for every sample, one (N, H) matrix per branch."""
    return tuple(
        forward(params, getattr(inputs, name))[0]
        for params, name in zip(params3, BRANCH_NAMES)
    )


def logits(params3, inputs: ModalityInputs):
    """Branch logits for every sample, one (N, K) matrix per branch."""
    return tuple(
        forward(params, getattr(inputs, name))[1]
        for params, name in zip(params3, BRANCH_NAMES)
    )


def extract_embeddings(params3, dataset: ModalityInputs):
    """Embeddings of a training set plus its channel-normalized gallery."""
    embs = embed(params3, dataset)
    batches = _embedding_batches(embs)
    return batches, Gallery.from_embeddings(*embs)


def save_checkpoint(path, params3, cfg: TrainConfig, class_ids=None) -> None:
    """Self-describing JSON checkpoint: shapes, row-major parameters, config echo."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": {
            "lambda_mmd": cfg.lambda_mmd,
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "epochs": cfg.epochs,
            "seed": cfg.seed,
            "hidden": cfg.hidden,
            "kernel": {
                "num_kernels": cfg.kernel.num_kernels,
                "alpha": cfg.kernel.alpha,
                "bandwidth_floor": cfg.kernel.bandwidth_floor,
            },
            "lr_decay_rate": cfg.lr_decay_rate,
            "lr_decay_steps": list(cfg.lr_decay_steps),
        },
        "class_ids": None if class_ids is None else [int(c) for c in class_ids],
        "branches": {
            name: {
                "w1": p.w1.tolist(),
                "b1": p.b1.tolist(),
                "w2": p.w2.tolist(),
                "b2": p.b2.tolist(),
            }
            for name, p in zip(BRANCH_NAMES, params3)
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Read a checkpoint; returns (params3, TrainConfig, class_ids)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid checkpoint {path}: {exc}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint header in {path}")
    c = doc["config"]
    cfg = TrainConfig(
        lambda_mmd=c["lambda_mmd"],
        learning_rate=c["learning_rate"],
        batch_size=c["batch_size"],
        epochs=c["epochs"],
        seed=c["seed"],
        hidden=c["hidden"],
        kernel=KernelConfig(**c["kernel"]),
        lr_decay_rate=c["lr_decay_rate"],
        lr_decay_steps=tuple(c["lr_decay_steps"]),
    )
    params3 = []
    for name in BRANCH_NAMES:
        b = doc["branches"][name]
        params = BranchParams(
            w1=np.asarray(b["w1"], dtype=np.float64),
            b1=np.asarray(b["b1"], dtype=np.float64),
            w2=np.asarray(b["w2"], dtype=np.float64),
            b2=np.asarray(b["b2"], dtype=np.float64),
        )
        params.validate()
        params3.append(params)
    class_ids = doc.get("class_ids")
    if class_ids is not None:
        class_ids = [int(c) for c in class_ids]
    return tuple(params3), cfg, class_ids
