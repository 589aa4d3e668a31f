"""Multi-kernel Gaussian MMD machinery and the cross-modality discrepancy.

The discrepancy couples three embedding batches (joints / bones / velocities)
as intra-source minus inter-source kernel means.  Kernels are built per
modality pairing: concatenate the two batches, take squared Euclidean
distances over the concatenation, set the base bandwidth to the mean
off-diagonal distance (floored), and expand it into a geometric list.  Each
pairing contributes its cross block to the inter term and half of each
participant's self block to the intra term, every block averaged over all of
its entries, diagonal included.  The difference then equals half the sum of
the three pairwise biased multi-kernel MMD^2 statistics, so it is nonnegative
(each summand is a squared RKHS norm of a mean-embedding difference) and
vanishes identically when the three batches coincide.

Gradients treat the bandwidths as constants (stop-gradient); pass an explicit
``bandwidths`` mapping to evaluate the discrepancy at frozen bandwidths, which
is also the convention under which finite-difference checks are run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

MODALITIES = ("joints", "bones", "velocities")

# One bandwidth ladder per modality pairing; each pairing owns a cross block
# and half of both participants' self blocks.
PAIR_BLOCKS = (("jb", 0, 1), ("jv", 0, 2), ("bv", 1, 2))


@dataclass(frozen=True)
class EmbeddingBatch:
    """An ``(N, C)`` matrix of latent features tagged with its modality."""

    data: np.ndarray
    modality: str

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DataError(f"expected a nonempty (N, C) matrix, got {data.shape}")
        if not np.isfinite(data).all():
            raise DataError("embeddings must be finite")
        if self.modality not in MODALITIES:
            raise DataError(f"unknown modality {self.modality!r}")
        object.__setattr__(self, "data", data)

    @property
    def num_samples(self) -> int:
        return self.data.shape[0]

    @property
    def num_channels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class KernelConfig:
    """Multi-kernel settings: kernel count, geometric scale, bandwidth floor."""

    num_kernels: int = 5
    alpha: float = 2.0
    bandwidth_floor: float = 1e-8

    def __post_init__(self) -> None:
        if self.num_kernels < 1:
            raise DataError("need at least one kernel")
        if not self.alpha > 1.0:
            raise DataError("bandwidth scaling factor must be > 1")
        if not self.bandwidth_floor > 0.0:
            raise DataError("bandwidth floor must be > 0")


@dataclass(frozen=True)
class KernelStack:
    """Gaussian kernel matrices, one per bandwidth in the list."""

    matrices: tuple[np.ndarray, ...]
    bandwidths: tuple[float, ...]


def _data(batch) -> np.ndarray:
    return batch.data if isinstance(batch, EmbeddingBatch) else np.asarray(batch, dtype=np.float64)


def _sq_block(xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    # Broadcast differences rather than the gemm expansion: coincident rows
    # give an exact zero and the matrix is exactly symmetric for xa == xb,
    # which keeps the discrepancy identically zero on equal batches.
    return ((xa[:, None, :] - xb[None, :, :]) ** 2).sum(axis=-1)


def pairwise_sq_distances(a, b) -> np.ndarray:
    """Squared Euclidean distances over the concatenation of two batches.

    Returns an ``(N_a + N_b, N_a + N_b)`` symmetric matrix with zero diagonal.
    """
    xa, xb = _data(a), _data(b)
    if xa.shape[1] != xb.shape[1]:
        raise DataError(
            f"channel mismatch: {xa.shape[1]} vs {xb.shape[1]} columns"
        )
    z = np.concatenate([xa, xb], axis=0)
    return _sq_block(z, z)


def bandwidth(dz: np.ndarray, floor: float = 1e-8) -> float:
    """Mean off-diagonal squared distance, floored away from zero.

    ``sum(dz) / (N^2 - N)`` over the full matrix (the diagonal contributes
    zeros to the sum).
    """
    dz = np.asarray(dz, dtype=np.float64)
    n = dz.shape[0]
    if dz.ndim != 2 or dz.shape[1] != n:
        raise DataError(f"distance matrix must be square, got {dz.shape}")
    if n < 2:
        raise DataError("bandwidth needs at least two samples")
    return max(float(dz.sum()) / (n * n - n), floor)


def bandwidth_list(bw: float, cfg: KernelConfig) -> list[float]:
    """Geometric bandwidth ladder ``bw * alpha**i`` for i in [0, num_kernels)."""
    if not bw > 0.0:
        raise DataError("base bandwidth must be positive")
    return [bw * cfg.alpha**i for i in range(cfg.num_kernels)]


def kernel_stack(dz: np.ndarray, cfg: KernelConfig) -> KernelStack:
    """Gaussian kernels ``exp(-dz / beta)`` for each ladder bandwidth."""
    bws = bandwidth_list(bandwidth(dz, cfg.bandwidth_floor), cfg)
    mats = tuple(np.exp(-dz / b) for b in bws)
    return KernelStack(matrices=mats, bandwidths=tuple(bws))


def _check_triple(zj, zb, zv) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs = (_data(zj), _data(zb), _data(zv))
    n = xs[0].shape[0]
    if any(x.shape[0] != n for x in xs):
        raise DataError(
            f"batch sizes differ across modalities: {[x.shape[0] for x in xs]}"
        )
    if n < 2:
        raise DataError("need at least two samples per modality batch")
    return xs


def block_bandwidths(zj, zb, zv, cfg: KernelConfig) -> dict[str, list[float]]:
    """Per-pairing bandwidth ladders (keys jb, jv, bv).

    Each ladder comes from the concatenation of the pairing's two batches.
    Used to freeze bandwidths when differentiating.
    """
    xs = _check_triple(zj, zb, zv)
    out: dict[str, list[float]] = {}
    for key, p, q in PAIR_BLOCKS:
        dz = pairwise_sq_distances(xs[p], xs[q])
        out[key] = bandwidth_list(bandwidth(dz, cfg.bandwidth_floor), cfg)
    return out


def _block_kernels(xa, xb, bws):
    """Kernel-sum and bandwidth-weighted kernel-sum for one (N_a, N_b) block."""
    d = _sq_block(xa, xb)
    ksum = np.zeros_like(d)
    wsum = np.zeros_like(d)
    for b in bws:
        k = np.exp(-d / b)
        ksum += k
        wsum += k / b
    return ksum, wsum


def _block_mean(xa, xb, bws) -> float:
    ksum, _ = _block_kernels(xa, xb, bws)
    return float(ksum.mean())


def _pair_ladders(xs, cfg, bandwidths):
    for key, p, q in PAIR_BLOCKS:
        if bandwidths is None:
            dz = pairwise_sq_distances(xs[p], xs[q])
            bws = bandwidth_list(bandwidth(dz, cfg.bandwidth_floor), cfg)
        else:
            bws = bandwidths[key]
        yield p, q, bws


def intra_term(zj, zb, zv, cfg: KernelConfig, bandwidths=None) -> float:
    """Self-similarity of the modality batches at the pairing bandwidths.

    Every pairing contributes half of each participant's self-block mean, so
    each modality's self block is averaged over the two bandwidth ladders it
    participates in.
    """
    xs = _check_triple(zj, zb, zv)
    total = 0.0
    for p, q, bws in _pair_ladders(xs, cfg, bandwidths):
        total += 0.5 * (_block_mean(xs[p], xs[p], bws) + _block_mean(xs[q], xs[q], bws))
    return total


def inter_term(zj, zb, zv, cfg: KernelConfig, bandwidths=None) -> float:
    """Mean summed-kernel similarity across the three modality pairings."""
    xs = _check_triple(zj, zb, zv)
    total = 0.0
    for p, q, bws in _pair_ladders(xs, cfg, bandwidths):
        total += _block_mean(xs[p], xs[q], bws)
    return total


def crossmmd(zj, zb, zv, cfg: KernelConfig, bandwidths=None) -> float:
    """Intra minus inter kernel means over the three modality batches.

    Equals half the sum of the three pairwise biased multi-kernel MMD^2
    statistics, hence nonnegative up to floating-point rounding, and exactly
    zero when the three batches coincide.
    """
    return intra_term(zj, zb, zv, cfg, bandwidths) - inter_term(
        zj, zb, zv, cfg, bandwidths
    )


def crossmmd_grad(zj, zb, zv, cfg: KernelConfig, bandwidths=None):
    """Gradient of the discrepancy w.r.t. each embedding matrix.

    Bandwidths are treated as constants.  For a block mean
    ``m(A, B) = mean_iq sum_k exp(-|a_i - b_q|^2 / beta_k)`` the derivative
    uses the weight matrix ``W = sum_k K_k / beta_k``:

    - self block:  dm/dA = -(4 / N^2) (diag(W 1) A - W A)
    - cross block: dm/dA = -(2 / (N_a N_b)) (diag(W 1) A - W B)
                   dm/dB = -(2 / (N_a N_b)) (diag(W^T 1) B - W^T A)

    Each pairing adds half its self-block gradients and subtracts its
    cross-block gradients.
    """
    xs = _check_triple(zj, zb, zv)
    if bandwidths is None:
        bandwidths = block_bandwidths(zj, zb, zv, cfg)
    grads = [np.zeros_like(x) for x in xs]

    def self_grad(x, bws):
        _, w = _block_kernels(x, x, bws)
        n = x.shape[0]
        return -(4.0 / (n * n)) * (w.sum(axis=1)[:, None] * x - w @ x)

    for p, q, bws in _pair_ladders(xs, cfg, bandwidths):
        xa, xb = xs[p], xs[q]
        na, nb = xa.shape[0], xb.shape[0]
        grads[p] += 0.5 * self_grad(xa, bws)
        grads[q] += 0.5 * self_grad(xb, bws)
        _, w = _block_kernels(xa, xb, bws)
        scale = 2.0 / (na * nb)
        # inter blocks enter the discrepancy with a minus sign
        grads[p] -= -scale * (w.sum(axis=1)[:, None] * xa - w @ xb)
        grads[q] -= -scale * (w.sum(axis=0)[:, None] * xb - w.T @ xa)

    return grads[0], grads[1], grads[2]
