"""Robust aggregation: pairwise distances, survivor selection, medians.

Two implementations of the same composite rule live here.

``SecureAggregator`` runs the real thing on encrypted gradients across the
two servers: one blinded-distance execution per unordered user pair
(blinding and partial decryption of each user are done once and reused),
homomorphic accumulation of per-user distance sums, joint decryption plus
top-k selection of the ceil(n/2) users with the smallest sums, then one
blinded outlier-filtered median per dimension over the survivors.

``plaintext_aggregate`` is the reference aggregator: an independent,
vectorized re-implementation of the identical selection and median logic on
signed encoded integers.  It serves both as the exact-equivalence oracle
for the encrypted pipeline and as the simulator's fast path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .paillier import Ciphertext, hom_add
from .protocols import PrimaryServer
from .transport import PHASE_SEC_SEL


@dataclass
class AggregationResult:
    """Aggregated gradient (signed encoded ints), survivors, rejections."""

    gradient: np.ndarray
    survivors: list[int]
    rejections: np.ndarray

    @property
    def total_rejections(self) -> int:
        return int(self.rejections.sum())


def survivor_count(n_users: int) -> int:
    return (n_users + 1) // 2  # ceil(n/2)


class SecureAggregator:
    """Drives one aggregation round over the encrypted gradient matrix."""

    def __init__(self, server1: PrimaryServer, feature_filter: bool = True):
        self.s1 = server1
        self.feature_filter = feature_filter

    def aggregate(self, enc_gradients: list[list[Ciphertext]]) -> AggregationResult:
        n = len(enc_gradients)
        if n < 2:
            raise ValueError("aggregation requires at least two gradients")
        dims = len(enc_gradients[0])
        if any(len(g) != dims for g in enc_gradients):
            raise ValueError("gradient dimension mismatch")
        s1 = self.s1
        pk = s1.pk
        s1.reset_round()

        for uid, cts in enumerate(enc_gradients):
            s1.blind_upload(uid, cts)

        # dis(i,i) would add zero; only unordered pairs are executed
        sums = [s1.encrypt_zero() for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                d = s1.pair_distance(i, j, enc_gradients[i], enc_gradients[j])
                sums[i] = hom_add(pk, sums[i], d)
                sums[j] = hom_add(pk, sums[j], d)

        survivors = s1.select_smallest(sums, survivor_count(n))
        s1.fabric.ledger.count_instance(PHASE_SEC_SEL)

        medians = np.zeros(dims, dtype=np.int64)
        rejections = np.zeros(dims, dtype=np.int64)
        for t in range(dims):
            column = [enc_gradients[i][t] for i in survivors]
            med, rejected = s1.dim_median(column)
            medians[t] = med
            rejections[t] = rejected
        return AggregationResult(medians, survivors, rejections)


# -- plaintext reference (independent oracle / fast path) -------------------


def pairwise_squared_distances(gradients: np.ndarray) -> list[list[int]]:
    """Exact integer squared distances between all rows (python ints)."""
    n, dims = gradients.shape
    max_abs = int(np.abs(gradients).max(initial=0))
    exact = max_abs and dims * (2 * max_abs) ** 2 >= 2**63  # int64 dot could wrap
    dist = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            diff = gradients[i] - gradients[j]
            if exact:
                diff = diff.astype(object)
            dist[i][j] = dist[j][i] = int(np.dot(diff, diff))
    return dist


def _select_survivors(gradients: np.ndarray) -> tuple[list[int], list[int]]:
    n = len(gradients)
    dist = pairwise_squared_distances(gradients)
    sums = [sum(row) for row in dist]
    order = sorted(range(n), key=lambda i: (sums[i], i))
    return sorted(order[: survivor_count(n)]), sums


def _pauta_keep_mask(columns: np.ndarray) -> np.ndarray:
    """Vectorized 3-sigma keep mask per dimension (population sigma, exact)."""
    n = columns.shape[0]
    max_abs = int(np.abs(columns).max(initial=0))
    # keep test is 9 * sum(d^2) >= n * d^2 with d up to 2*n*max_abs
    if max_abs and 9 * n * (2 * n * max_abs) ** 2 >= 2**63:
        total = columns.astype(object).sum(axis=0)
        devs = n * columns.astype(object) - total
        dev_sq_sum = (devs * devs).sum(axis=0)
        return np.asarray(n * devs * devs <= 9 * dev_sq_sum).astype(bool)
    total = columns.sum(axis=0)
    devs = n * columns - total
    dev_sq = devs * devs
    return n * dev_sq <= 9 * dev_sq.sum(axis=0)


def plaintext_aggregate(
    gradients: np.ndarray, feature_filter: bool = True
) -> AggregationResult:
    """Reference aggregation on signed encoded integers (int64 matrix).

    Identical selection and median logic as the encrypted pipeline; with
    ``feature_filter=False`` the per-dimension outlier pass is skipped and
    survivors are averaged instead (plain representative-selection
    ablation).
    """
    gradients = np.asarray(gradients, dtype=np.int64)
    n, dims = gradients.shape
    if n < 2:
        raise ValueError("aggregation requires at least two gradients")
    survivors, _ = _select_survivors(gradients)
    rows = gradients[survivors]

    if not feature_filter:
        mean = np.rint(rows.astype(np.float64).mean(axis=0)).astype(np.int64)
        return AggregationResult(mean, survivors, np.zeros(dims, dtype=np.int64))

    keep = _pauta_keep_mask(rows)
    rejections = (~keep).sum(axis=0).astype(np.int64)
    sentinel = np.iinfo(np.int64).max
    masked = np.where(keep, rows, sentinel)
    masked.sort(axis=0)
    kept_counts = keep.sum(axis=0)
    median_idx = (kept_counts - 1) // 2
    medians = np.take_along_axis(masked, median_idx[None, :], axis=0)[0]
    return AggregationResult(medians.astype(np.int64), survivors, rejections)
