"""Seen/unseen class splits and dataset partitioning.

A split assigns every class index of a dataset to either the seen or the
unseen side.  Splits come from two sources: seeded random generation (partial
Fisher-Yates selection of the unseen classes) or the published fixture tables
for NTU60, NTU120, and ToyotaSmartHome shipped with the package.  Partitioning
then files each sample into train-seen, test-seen, or test-unseen; unseen
training samples are discarded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _fixtures
from .errors import DataError

MANIFEST_FORMAT = "crossmax-split"
MANIFEST_VERSION = 1

FIXTURE_DATASETS = ("ntu60", "ntu120", "toyota")
NUM_FIXTURE_RUNS = 5


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint seen/unseen class partition for one evaluation run."""

    dataset_name: str
    run_id: int
    seen: tuple[int, ...]
    unseen: tuple[int, ...]
    seed: int | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.run_id <= NUM_FIXTURE_RUNS:
            raise DataError(f"run_id must be in 1..{NUM_FIXTURE_RUNS}")
        seen = tuple(sorted(int(c) for c in self.seen))
        unseen = tuple(sorted(int(c) for c in self.unseen))
        if not seen or not unseen:
            raise DataError("both seen and unseen sides must be nonempty")
        if set(seen) & set(unseen):
            raise DataError("seen and unseen classes overlap")
        full = set(seen) | set(unseen)
        if full != set(range(len(full))):
            raise DataError("split must cover the class range 0..K-1 exactly")
        object.__setattr__(self, "seen", seen)
        object.__setattr__(self, "unseen", unseen)

    @property
    def num_classes(self) -> int:
        return len(self.seen) + len(self.unseen)


def generate_split(
    num_classes: int,
    num_unseen: int,
    seed: int,
    dataset_name: str = "random",
    run_id: int = 1,
) -> SplitSpec:
    """Seeded uniform choice of ``num_unseen`` distinct unseen classes.

    Uses a partial Fisher-Yates shuffle so only ``num_unseen`` swaps are
    drawn; deterministic for a fixed seed.
    """
    if not 0 < num_unseen < num_classes:
        raise DataError("need 0 < num_unseen < num_classes")
    rng = np.random.default_rng(seed)
    pool = list(range(num_classes))
    for i in range(num_unseen):
        j = int(rng.integers(i, num_classes))
        pool[i], pool[j] = pool[j], pool[i]
    unseen = sorted(pool[:num_unseen])
    seen = sorted(set(range(num_classes)) - set(unseen))
    return SplitSpec(
        dataset_name=dataset_name,
        run_id=run_id,
        seen=tuple(seen),
        unseen=tuple(unseen),
        seed=seed,
    )


def _canonical_dataset(name: str) -> str:
    key = name.strip().lower().replace("-", "").replace("_", "")
    aliases = {
        "ntu60": "ntu60",
        "ntu120": "ntu120",
        "toyota": "toyota",
        "toyotasmarthome": "toyota",
        "tyt": "toyota",
    }
    if key not in aliases:
        raise DataError(f"unknown fixture dataset {name!r}")
    return aliases[key]


def toyota_class_index(class_names=None) -> dict[str, int]:
    """Name-to-index map for ToyotaSmartHome classes.

    The default enumerates the 31 published names in sorted order; pass the
    dataset's own ordering to match an external labeling.
    """
    names = tuple(class_names) if class_names is not None else _fixtures.TOYOTA_CLASS_NAMES
    if len(set(names)) != len(names):
        raise DataError("class names must be unique")
    return {name: i for i, name in enumerate(names)}


def load_fixture_split(
    dataset_name: str, run_id: int, class_names=None
) -> SplitSpec:
    """Return one of the fifteen published splits.

    ``class_names`` only applies to ToyotaSmartHome, whose fixtures are
    published as class names rather than indices.
    """
    dataset = _canonical_dataset(dataset_name)
    if not 1 <= run_id <= NUM_FIXTURE_RUNS:
        raise DataError(f"run_id must be in 1..{NUM_FIXTURE_RUNS}")
    if dataset == "ntu60":
        unseen = _fixtures.NTU60_UNSEEN[run_id]
        seen = sorted(set(range(_fixtures.NTU60_NUM_CLASSES)) - set(unseen))
        return SplitSpec("ntu60", run_id, tuple(seen), tuple(sorted(unseen)))
    if dataset == "ntu120":
        seen = _fixtures.NTU120_SEEN[run_id]
        unseen = sorted(set(range(_fixtures.NTU120_NUM_CLASSES)) - set(seen))
        return SplitSpec("ntu120", run_id, tuple(sorted(seen)), tuple(unseen))
    index = toyota_class_index(class_names)
    if len(index) != _fixtures.TOYOTA_NUM_CLASSES:
        raise DataError(
            f"ToyotaSmartHome has {_fixtures.TOYOTA_NUM_CLASSES} classes, "
            f"got {len(index)} names"
        )
    try:
        unseen = sorted(index[name] for name in _fixtures.TOYOTA_UNSEEN_NAMES[run_id])
    except KeyError as exc:
        raise DataError(f"class name {exc.args[0]!r} missing from the map") from exc
    seen = sorted(set(range(len(index))) - set(unseen))
    return SplitSpec("toyota", run_id, tuple(seen), tuple(unseen))


def fixture_ids() -> list[tuple[str, int]]:
    """All (dataset, run_id) pairs with a published fixture split."""
    return [(d, r) for d in FIXTURE_DATASETS for r in range(1, NUM_FIXTURE_RUNS + 1)]


@dataclass(frozen=True)
class PartitionIndices:
    """Sample indices for the three evaluation populations."""

    train_seen: np.ndarray
    test_seen: np.ndarray
    test_unseen: np.ndarray


def partition(labels, is_train, split: SplitSpec) -> PartitionIndices:
    """File samples into train-seen / test-seen / test-unseen index arrays.

    Training samples of unseen classes are discarded.  Labels must lie inside
    the split's class range.
    """
    labels = np.asarray(labels, dtype=np.int64)
    is_train = np.asarray(is_train, dtype=bool)
    if labels.shape != is_train.shape or labels.ndim != 1:
        raise DataError("labels and train flags must be 1-D and aligned")
    if labels.size and (labels.min() < 0 or labels.max() >= split.num_classes):
        raise DataError("label outside the split's class range")
    seen_mask = np.isin(labels, np.asarray(split.seen, dtype=np.int64))
    return PartitionIndices(
        train_seen=np.flatnonzero(is_train & seen_mask),
        test_seen=np.flatnonzero(~is_train & seen_mask),
        test_unseen=np.flatnonzero(~is_train & ~seen_mask),
    )


def save_manifest(split: SplitSpec, path) -> None:
    """Write a split as a versioned JSON manifest."""
    doc = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "dataset_name": split.dataset_name,
        "run_id": split.run_id,
        "seen": list(split.seen),
        "unseen": list(split.unseen),
    }
    if split.seed is not None:
        doc["seed"] = split.seed
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_manifest(path) -> SplitSpec:
    """Read a split manifest, rejecting unknown formats or versions."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid split manifest {path}: {exc}") from exc
    if doc.get("format") != MANIFEST_FORMAT or doc.get("version") != MANIFEST_VERSION:
        raise DataError(f"unsupported split manifest header in {path}")
    return SplitSpec(
        dataset_name=doc["dataset_name"],
        run_id=int(doc["run_id"]),
        seen=tuple(doc["seen"]),
        unseen=tuple(doc["unseen"]),
        seed=doc.get("seed"),
    )
