"""Test-time open-set scoring: gallery distances and logits refinement.

Scoring combines two signals per test sample: the channel-normalized
Euclidean (CNE) distance from each modality embedding to its nearest
training-gallery row, and the logits averaged over the three modality
branches.  The averaged distance rescales the logits and shifts the salient
(argmax) entry by ``log(1/d - 1)``, so small distances boost confidence and
large ones suppress it.  The final open-set probability is the softmax
maximum of the refined logits; novelty is its complement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

EPS_NORM = 1e-12
# The salient shift log(1/d - 1) is undefined at d <= 0 and d >= 1, while
# normalized distances range over [0, 2]; distances are clamped to this band.
EPS_DISTANCE = 1e-6

SCORE_VARIANTS = (
    "crossmax",
    "vanilla_softmax",
    "cne_only",
    "dist_min",
    "dist_max",
    "dist_joints",
    "dist_bones",
    "dist_velocities",
)


@dataclass(frozen=True)
class Gallery:
    """Channel-normalized training embeddings, one matrix per modality.

    The three matrices share the row count and sample ordering.  Immutable
    after construction and safe to share across concurrent scorers.
    """

    joints: np.ndarray
    bones: np.ndarray
    velocities: np.ndarray

    def __post_init__(self) -> None:
        mats = {}
        n_ref = None
        for name in ("joints", "bones", "velocities"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.ndim != 2 or m.shape[0] < 1:
                raise DataError(f"gallery {name} must be a nonempty (N, C) matrix")
            norms = np.linalg.norm(m, axis=1)
            if not np.allclose(norms, 1.0, atol=1e-9):
                raise DataError(f"gallery {name} rows must be unit-norm to 1e-9")
            if n_ref is None:
                n_ref = m.shape[0]
            elif m.shape[0] != n_ref:
                raise DataError("gallery matrices must share the row count")
            mats[name] = m
        for name, m in mats.items():
            object.__setattr__(self, name, m)

    @classmethod
    def from_embeddings(cls, joints, bones, velocities) -> "Gallery":
        """Build a gallery by unit-normalizing each embedding row."""
        return cls(
            joints=normalize_rows(joints),
            bones=normalize_rows(bones),
            velocities=normalize_rows(velocities),
        )

    @property
    def num_rows(self) -> int:
        return self.joints.shape[0]

    def modality(self, name: str) -> np.ndarray:
        if name not in ("joints", "bones", "velocities"):
            raise DataError(f"unknown modality {name!r}")
        return getattr(self, name)

    def subsample(self, max_rows: int, seed: int = 0) -> "Gallery":
        """Uniform row subsample (without replacement), aligned across modalities."""
        if max_rows < 1:
            raise DataError("subsample size must be >= 1")
        if max_rows >= self.num_rows:
            return self
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(self.num_rows, size=max_rows, replace=False))
        return Gallery(self.joints[idx], self.bones[idx], self.velocities[idx])


@dataclass(frozen=True)
class LogitsRecord:
    """Per-sample branch logits plus per-modality gallery distances."""

    logits_joints: np.ndarray
    logits_bones: np.ndarray
    logits_velocities: np.ndarray
    dist_joints: float
    dist_bones: float
    dist_velocities: float
    mean_dist: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        vecs = []
        for name in ("logits_joints", "logits_bones", "logits_velocities"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.ndim != 1 or v.shape[0] < 2:
                raise DataError(f"{name} must be a vector of length >= 2")
            if not np.isfinite(v).all():
                raise DataError(f"{name} must be finite")
            vecs.append(v)
            object.__setattr__(self, name, v)
        if not (vecs[0].shape == vecs[1].shape == vecs[2].shape):
            raise DataError("the three logit vectors must share their length")
        for name in ("dist_joints", "dist_bones", "dist_velocities"):
            d = float(getattr(self, name))
            if not (np.isfinite(d) and d >= 0.0):
                raise DataError(f"{name} must be finite and nonnegative")
            object.__setattr__(self, name, d)
        mean = mean_distance(self.dist_joints, self.dist_bones, self.dist_velocities)
        if self.mean_dist is None:
            object.__setattr__(self, "mean_dist", mean)
        elif abs(float(self.mean_dist) - mean) > 1e-12:
            raise DataError("mean_dist must equal the mean of the three distances")

    @property
    def num_classes(self) -> int:
        return self.logits_joints.shape[0]


@dataclass(frozen=True)
class OpenSetResult:
    """Refined logits with the predicted class and open-set probability."""

    refined_logits: np.ndarray
    predicted_class: int
    p_prob: float
    novelty: float


def channel_normalize(e) -> np.ndarray:
    """Scale a feature vector to unit L2 norm; rejects near-zero vectors."""
    e = np.asarray(e, dtype=np.float64)
    norm = float(np.linalg.norm(e))
    if norm < EPS_NORM:
        raise DataError("cannot normalize a (near-)zero vector")
    return e / norm


def normalize_rows(m) -> np.ndarray:
    """Unit-normalize every row of an ``(N, C)`` matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DataError(f"expected an (N, C) matrix, got shape {m.shape}")
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms < EPS_NORM):
        raise DataError("cannot normalize rows with (near-)zero norm")
    return m / norms


def nearest_distance(e, gallery_modality: np.ndarray) -> float:
    """Euclidean distance to the closest gallery row (exact linear scan).

    Both the query and the gallery rows are expected unit-norm, so the result
    lies in [0, 2].  Ties resolve to the smallest row index, which cannot
    change the returned value.
    """
    e = np.asarray(e, dtype=np.float64)
    g = np.asarray(gallery_modality, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 1:
        raise DataError("gallery must be a nonempty (N, C) matrix")
    if e.shape != (g.shape[1],):
        raise DataError(f"query shape {e.shape} does not match gallery C={g.shape[1]}")
    d = np.linalg.norm(g - e[None, :], axis=1)
    return float(d[int(np.argmin(d))])


def mean_distance(d_j: float, d_b: float, d_v: float) -> float:
    """Arithmetic mean of the three per-modality distances."""
    for d in (d_j, d_b, d_v):
        if d < 0.0:
            raise DataError("distances must be nonnegative")
    return (float(d_j) + float(d_b) + float(d_v)) / 3.0


def salient_mask(l_j, l_b, l_v) -> tuple[np.ndarray, int]:
    """Average the branch logits and locate the salient (argmax) position.

    Ties break to the smallest index.
    """
    vecs = [np.asarray(v, dtype=np.float64) for v in (l_j, l_b, l_v)]
    if not (vecs[0].shape == vecs[1].shape == vecs[2].shape) or vecs[0].ndim != 1:
        raise DataError("logit vectors must be 1-D and share their length")
    mean_logits = (vecs[0] + vecs[1] + vecs[2]) / 3.0
    return mean_logits, int(np.argmax(mean_logits))


def refine_logits(mean_logits, salient_index: int, mean_dist: float) -> np.ndarray:
    """Distance-based refinement of the averaged logits.

    With d the clamped mean distance, the salient entry becomes
    ``l * d^2 + log(1/d - 1)`` and every other entry ``l * d^2``.  The log
    term is the exact simplification of exponentiating the scaled salient
    logit, multiplying by ``(1/d - 1)`` and taking the log again; computing it
    directly avoids overflow for large logits.
    """
    l_m = np.asarray(mean_logits, dtype=np.float64)
    if l_m.ndim != 1:
        raise DataError("mean logits must be a vector")
    if not np.isfinite(l_m).all():
        raise DataError("mean logits must be finite")
    if not 0 <= salient_index < l_m.shape[0]:
        raise DataError(f"salient index {salient_index} out of range")
    d = min(max(float(mean_dist), EPS_DISTANCE), 1.0 - EPS_DISTANCE)
    refined = l_m * d * d
    refined[salient_index] += np.log(1.0 / d - 1.0)
    return refined


def softmax(x) -> np.ndarray:
    """Numerically stable softmax (max-subtraction)."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(x - x.max())
    return e / e.sum()


def open_set_probability(refined) -> OpenSetResult:
    """Softmax the refined logits; the maximum is the open-set probability."""
    refined = np.asarray(refined, dtype=np.float64)
    if not np.isfinite(refined).all():
        raise DataError("refined logits must be finite")
    probs = softmax(refined)
    cls = int(np.argmax(probs))
    p = float(probs[cls])
    return OpenSetResult(
        refined_logits=refined, predicted_class=cls, p_prob=p, novelty=1.0 - p
    )


def score_sample(record: LogitsRecord, refine: bool = True) -> OpenSetResult:
    """Full scoring path: average logits, refine by distance, softmax.

    With ``refine=False`` the averaged logits go straight to softmax, which
    reproduces the vanilla max-softmax baseline bit for bit.
    """
    mean_logits, salient = salient_mask(
        record.logits_joints, record.logits_bones, record.logits_velocities
    )
    if not refine:
        return open_set_probability(mean_logits)
    return open_set_probability(refine_logits(mean_logits, salient, record.mean_dist))


def _distance_score(d: float) -> float:
    # Monotone map from distance to a score in [0, 1]; ranking metrics are
    # invariant to the choice as long as it is decreasing in d.
    return 1.0 - min(max(d, 0.0), 1.0)


def variant_score(record: LogitsRecord, variant: str) -> tuple[int, float]:
    """Predicted class and open-set probability under a scoring variant.

    ``crossmax`` is the refined path and ``vanilla_softmax`` the unrefined
    one.  The distance variants score by ``1 - clamp(d, 0, 1)`` for the
    chosen aggregation of per-modality distances; their predicted class is
    the salient position of the averaged logits.
    """
    if variant not in SCORE_VARIANTS:
        raise DataError(f"unknown score variant {variant!r}")
    if variant == "crossmax":
        r = score_sample(record, refine=True)
        return r.predicted_class, r.p_prob
    if variant == "vanilla_softmax":
        r = score_sample(record, refine=False)
        return r.predicted_class, r.p_prob
    _, salient = salient_mask(
        record.logits_joints, record.logits_bones, record.logits_velocities
    )
    dists = (record.dist_joints, record.dist_bones, record.dist_velocities)
    if variant == "cne_only":
        d = record.mean_dist
    elif variant == "dist_min":
        d = min(dists)
    elif variant == "dist_max":
        d = max(dists)
    else:
        d = dists[("dist_joints", "dist_bones", "dist_velocities").index(variant)]
    return salient, _distance_score(d)


def gallery_distances(
    gallery: Gallery, emb_joints, emb_bones, emb_velocities
) -> np.ndarray:
    """Per-sample CNE distances of test embeddings to the gallery.

    Rows of the inputs are raw (unnormalized) embeddings; each is normalized
    before the nearest-neighbor scan.  Returns an ``(N, 3)`` array in the
    modality order joints, bones, velocities.
    """
    embs = [np.asarray(e, dtype=np.float64) for e in (emb_joints, emb_bones, emb_velocities)]
    n = embs[0].shape[0]
    if any(e.ndim != 2 or e.shape[0] != n for e in embs):
        raise DataError("test embeddings must be (N, C) with a shared N")
    out = np.empty((n, 3))
    for col, (e, name) in enumerate(zip(embs, ("joints", "bones", "velocities"))):
        g = gallery.modality(name)
        for i in range(n):
            out[i, col] = nearest_distance(channel_normalize(e[i]), g)
    return out
