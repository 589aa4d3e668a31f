"""Seeded Gaussian-cluster skeleton datasets for desk-scale experiments.

Each class is a random prototype motion (a ``(T, N, 3)`` tensor); samples are
the prototype plus i.i.d. Gaussian jitter.  Classes are therefore Gaussian
clusters in flattened coordinate space, which keeps the classifier trainable
in seconds while still exercising every stage of the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .skeleton import SkeletonSequence


@dataclass
class SkeletonDataset:
    """Sequences with parallel label and train-flag arrays."""

    sequences: list[SkeletonSequence]
    labels: np.ndarray
    is_train: np.ndarray

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.is_train = np.asarray(self.is_train, dtype=bool)
        n = len(self.sequences)
        if self.labels.shape != (n,) or self.is_train.shape != (n,):
            raise DataError("labels and train flags must align with the sequences")


def gaussian_cluster_skeletons(
    num_classes: int,
    train_per_class: int,
    test_per_class: int,
    frames: int = 8,
    joints: int = 5,
    class_scale: float = 1.5,
    noise_scale: float = 0.25,
    seed: int = 0,
) -> SkeletonDataset:
    """Generate one cluster per class, split into train and test samples.

    ``class_scale`` controls how far the class prototypes sit apart;
    ``noise_scale`` is the per-sample jitter.  Deterministic for a fixed seed.
    """
    if num_classes < 2:
        raise DataError("need at least two classes")
    if train_per_class < 0 or test_per_class < 1:
        raise DataError("need nonnegative train and positive test counts")
    rng = np.random.default_rng(seed)
    sequences: list[SkeletonSequence] = []
    labels: list[int] = []
    flags: list[bool] = []
    shape = (frames, joints, 3)
    for cls in range(num_classes):
        prototype = rng.normal(0.0, class_scale, size=shape)
        for is_train, count in ((True, train_per_class), (False, test_per_class)):
            for _ in range(count):
                coords = prototype + rng.normal(0.0, noise_scale, size=shape)
                sequences.append(SkeletonSequence(coords, label=cls))
                labels.append(cls)
                flags.append(is_train)
    return SkeletonDataset(sequences, np.asarray(labels), np.asarray(flags))
