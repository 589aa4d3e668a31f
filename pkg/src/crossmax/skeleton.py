"""Skeleton sequences, derived modalities, and perturbation ablations.

A skeleton sequence is a ``(T, N, 3)`` array of xyz coordinates over ``T``
frames and ``N`` joints.  Two further modalities are derived from it:
velocities (frame-to-frame joint differences, first frame zero-padded) and
bones (child minus parent joint per edge of a bone topology).  The
perturbation helpers implement the two robustness ablations used in the
evaluation protocol: additive Gaussian coordinate noise and random occlusion
that zeroes a fixed fraction of coordinate entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

GAUSSIAN_NOISE = "gaussian_noise"
OCCLUSION = "occlusion"
PERTURBATION_KINDS = (GAUSSIAN_NOISE, OCCLUSION)


@dataclass(frozen=True)
class SkeletonSequence:
    """A ``(T, N, 3)`` coordinate tensor with an optional class label.

    Coordinates must be finite.  Single-frame and single-joint sequences are
    accepted; operations that need more (e.g. velocities need ``T >= 2``)
    enforce their own preconditions.
    """

    coords: np.ndarray
    label: int | None = None

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 3 or coords.shape[2] != 3:
            raise DataError(f"expected coords of shape (T, N, 3), got {coords.shape}")
        if coords.shape[0] < 1 or coords.shape[1] < 1:
            raise DataError(f"empty sequence: shape {coords.shape}")
        if not np.isfinite(coords).all():
            raise DataError("skeleton coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def num_frames(self) -> int:
        return self.coords.shape[0]

    @property
    def num_joints(self) -> int:
        return self.coords.shape[1]


@dataclass(frozen=True)
class BoneTopology:
    """Ordered ``(child, parent)`` joint index pairs defining the bones."""

    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        edges = tuple((int(c), int(p)) for c, p in self.edges)
        if not edges:
            raise DataError("bone topology needs at least one edge")
        for child, parent in edges:
            if child == parent:
                raise DataError(f"self-edge ({child}, {parent}) is not a bone")
            if child < 0 or parent < 0:
                raise DataError(f"negative joint index in edge ({child}, {parent})")
        object.__setattr__(self, "edges", edges)

    @property
    def num_bones(self) -> int:
        return len(self.edges)

    def validate_for(self, num_joints: int) -> None:
        for child, parent in self.edges:
            if child >= num_joints or parent >= num_joints:
                raise DataError(
                    f"edge ({child}, {parent}) out of range for {num_joints} joints"
                )


def chain_topology(num_joints: int) -> BoneTopology:
    """Default chain skeleton: joint ``i`` hangs off joint ``i - 1``."""
    if num_joints < 2:
        raise DataError("chain topology needs at least two joints")
    return BoneTopology(tuple((i, i - 1) for i in range(1, num_joints)))


@dataclass(frozen=True)
class PerturbationConfig:
    """Settings for one perturbation kind.

    ``gamma`` scales the Gaussian noise; ``theta_choices`` are the candidate
    occlusion ratios (each strictly inside (0, 1)), stored sorted so that the
    draw order is independent of how the caller listed them.
    """

    kind: str
    gamma: float = 0.0
    theta_choices: tuple[float, ...] = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in PERTURBATION_KINDS:
            raise DataError(f"unknown perturbation kind {self.kind!r}")
        if self.gamma < 0:
            raise DataError("noise scale gamma must be >= 0")
        thetas = tuple(sorted(set(float(t) for t in self.theta_choices)))
        for theta in thetas:
            if not 0.0 < theta < 1.0:
                raise DataError(f"occlusion ratio {theta} outside (0, 1)")
        if self.kind == OCCLUSION and not thetas:
            raise DataError("occlusion needs at least one ratio")
        object.__setattr__(self, "theta_choices", thetas)


def derive_velocities(seq: SkeletonSequence) -> SkeletonSequence:
    """Frame-difference modality: frame t holds ``j_t - j_{t-1}``.

    The first output frame is zero so velocities stay shape-aligned with the
    joints modality.
    """
    if seq.num_frames < 2:
        raise DataError("velocities need at least two frames")
    out = np.zeros_like(seq.coords)
    out[1:] = seq.coords[1:] - seq.coords[:-1]
    return SkeletonSequence(out, label=seq.label)


def derive_bones(seq: SkeletonSequence, topo: BoneTopology) -> SkeletonSequence:
    """Bone-vector modality: per frame and edge, child minus parent joint."""
    topo.validate_for(seq.num_joints)
    children = [c for c, _ in topo.edges]
    parents = [p for _, p in topo.edges]
    out = seq.coords[:, children, :] - seq.coords[:, parents, :]
    return SkeletonSequence(out, label=seq.label)


def add_gaussian_noise(
    seq: SkeletonSequence, cfg: PerturbationConfig
) -> SkeletonSequence:
    """Additive coordinate noise ``s + gamma * n`` with standard normal n.

    Deterministic for a fixed ``cfg.seed``; the generator is created per call
    and never shared.
    """
    if cfg.kind != GAUSSIAN_NOISE:
        raise DataError(f"config kind {cfg.kind!r} is not {GAUSSIAN_NOISE!r}")
    rng = np.random.default_rng(cfg.seed)
    noise = rng.standard_normal(seq.coords.shape)
    return SkeletonSequence(seq.coords + cfg.gamma * noise, label=seq.label)


def apply_random_occlusion(
    seq: SkeletonSequence, cfg: PerturbationConfig
) -> SkeletonSequence:
    """Zero out a random fraction of coordinate entries.

    One ratio theta is drawn uniformly from ``cfg.theta_choices``, then
    exactly ``round(theta * T * N * 3)`` entries (round half up) are chosen
    uniformly without replacement and set to zero.
    """
    if cfg.kind != OCCLUSION:
        raise DataError(f"config kind {cfg.kind!r} is not {OCCLUSION!r}")
    rng = np.random.default_rng(cfg.seed)
    theta = cfg.theta_choices[int(rng.integers(len(cfg.theta_choices)))]
    size = seq.coords.size
    count = int(math.floor(theta * size + 0.5))
    flat = seq.coords.copy().reshape(-1)
    if count > 0:
        idx = rng.choice(size, size=count, replace=False)
        flat[idx] = 0.0
    return SkeletonSequence(flat.reshape(seq.coords.shape), label=seq.label)
