"""Cross-modality open-set recognition toolkit for skeleton action data.

The package covers the full method end to end: modality derivation from
skeleton sequences, the multi-kernel cross-modality discrepancy training
loss with analytic gradients, gallery-based distance scoring with logits
refinement, open-set evaluation metrics, seen/unseen split management, and a
desk-scale trainable three-branch classifier tying it all together.
"""

from .errors import ConfigError, CrossMaxError, DataError, NumericError
from .metrics import (
    LabeledScore,
    MetricsReport,
    auroc_pairwise_oracle,
    c_acc,
    evaluate,
    o_auroc,
    o_aupr,
    pr_curve,
    roc_curve,
)
from .mmd import (
    EmbeddingBatch,
    KernelConfig,
    KernelStack,
    bandwidth,
    bandwidth_list,
    block_bandwidths,
    crossmmd,
    crossmmd_grad,
    inter_term,
    intra_term,
    kernel_stack,
    pairwise_sq_distances,
)
from .model import (
    BranchParams,
    ModalityInputs,
    TrainConfig,
    backward,
    extract_embeddings,
    forward,
    total_loss,
    train,
)
from .scoring import (
    Gallery,
    LogitsRecord,
    OpenSetResult,
    channel_normalize,
    mean_distance,
    nearest_distance,
    open_set_probability,
    refine_logits,
    salient_mask,
    score_sample,
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
from .splits import (
    SplitSpec,
    generate_split,
    load_fixture_split,
    load_manifest,
    partition,
    save_manifest,
)
from .synthetic import SkeletonDataset, gaussian_cluster_skeletons

__version__ = "0.1.0"

__all__ = [
    "BoneTopology",
    "BranchParams",
    "ConfigError",
    "CrossMaxError",
    "DataError",
    "EmbeddingBatch",
    "Gallery",
    "KernelConfig",
    "KernelStack",
    "LabeledScore",
    "LogitsRecord",
    "MetricsReport",
    "ModalityInputs",
    "NumericError",
    "OpenSetResult",
    "PerturbationConfig",
    "SkeletonDataset",
    "SkeletonSequence",
    "SplitSpec",
    "TrainConfig",
    "add_gaussian_noise",
    "apply_random_occlusion",
    "auroc_pairwise_oracle",
    "backward",
    "bandwidth",
    "bandwidth_list",
    "block_bandwidths",
    "c_acc",
    "chain_topology",
    "channel_normalize",
    "crossmmd",
    "crossmmd_grad",
    "derive_bones",
    "derive_velocities",
    "evaluate",
    "extract_embeddings",
    "forward",
    "gaussian_cluster_skeletons",
    "generate_split",
    "inter_term",
    "intra_term",
    "kernel_stack",
    "load_fixture_split",
    "load_manifest",
    "mean_distance",
    "nearest_distance",
    "o_auroc",
    "o_aupr",
    "open_set_probability",
    "pairwise_sq_distances",
    "partition",
    "pr_curve",
    "refine_logits",
    "roc_curve",
    "salient_mask",
    "save_manifest",
    "score_sample",
    "total_loss",
    "train",
    "variant_score",
]
