"""Hypercube partitioning of one atom's relation.

The plan assigns every query variable a power-of-two share.  Each row of an
atom's relation gets a tuple of partition identifiers (one per attribute),
the identifiers are histogrammed in lexicographic order, and the rows are
scattered into a single contiguous array holding all partitions back to
back.  Partitions are then sorted under the plan's variable order so the
trie index can be built by a linear pass.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import ConfigError, Relation
from .util import derive_seed, physical_core_count

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)

# Below this partition count the whole array is sorted once, keyed by
# (partition id, permuted row), instead of sorting each partition separately.
JOINT_SORT_THRESHOLD_FACTOR = 1


class VariableHash:
    """Multiply-shift hash for one variable: Value -> {0..share-1}.

    The odd 64-bit multiplier is derived from the master seed; the top
    log2(share) bits of the product are the bucket (a constant 0 when the
    share is 1).
    """

    __slots__ = ("share", "_mult", "_shift")

    def __init__(self, share: int, seed: int):
        if share < 1 or share & (share - 1):
            raise ConfigError(f"share must be a power of two, got {share}")
        self.share = share
        self._mult = np.uint64(seed | 1)
        self._shift = np.uint64(64 - (share.bit_length() - 1))

    def __call__(self, values: np.ndarray) -> np.ndarray:
        if self.share == 1:
            return np.zeros(len(values), dtype=np.uint32)
        prod = (values.astype(np.uint64) * self._mult) & _MASK64
        return (prod >> self._shift).astype(np.uint32)

    def one(self, value: int) -> int:
        return int(self(np.asarray([value], dtype=np.uint64))[0])


class MappingHash:
    """Table-driven hash for tests that need specific bucket assignments."""

    __slots__ = ("share", "_table", "_default")

    def __init__(self, share: int, table: dict[int, int], default: int = 0):
        self.share = share
        self._table = dict(table)
        self._default = default

    def __call__(self, values: np.ndarray) -> np.ndarray:
        out = np.fromiter(
            (self._table.get(int(v), self._default) for v in values),
            dtype=np.uint32, count=len(values),
        )
        return out

    def one(self, value: int) -> int:
        return self._table.get(int(value), self._default)


class HashFamily:
    """One independent seeded hash per query variable, shared by all atoms."""

    def __init__(self, hashes: dict[str, VariableHash | MappingHash]):
        self.hashes = hashes

    @classmethod
    def from_seed(cls, shares: dict[str, int], seed: int) -> "HashFamily":
        hashes = {}
        for i, (var, share) in enumerate(shares.items()):
            hashes[var] = VariableHash(share, derive_seed(seed, i))
        return cls(hashes)

    def __getitem__(self, var: str):
        return self.hashes[var]


@dataclass(frozen=True)
class ShareVector:
    """Per-variable shares; their product is the task count P."""

    variables: tuple[str, ...]
    shares: tuple[int, ...]

    def __post_init__(self):
        if len(self.variables) != len(self.shares):
            raise ConfigError("one share per variable required")
        for s in self.shares:
            if s < 1 or s & (s - 1):
                raise ConfigError(f"shares must be powers of two, got {s}")

    @property
    def total(self) -> int:
        p = 1
        for s in self.shares:
            p *= s
        return p

    def share_of(self, var: str) -> int:
        return self.shares[self.variables.index(var)]


@dataclass
class PartitionedRelation:
    """The scattered array plus the offset table addressing its partitions.

    data holds the same row multiset as the source, grouped contiguously per
    partition; offsets has one entry per partition in lexicographic id order
    plus a trailing sentinel equal to the row count.
    """

    data: np.ndarray
    offsets: np.ndarray
    shares: tuple[int, ...]  # per attribute, in the atom's attribute order
    order: tuple[int, ...]   # attribute permutation used for sorting

    @property
    def num_partitions(self) -> int:
        return len(self.offsets) - 1

    def partition_slice(self, flat_id: int) -> np.ndarray:
        return self.data[self.offsets[flat_id]:self.offsets[flat_id + 1]]

    def flat_id(self, ids: tuple[int, ...]) -> int:
        flat = 0
        for s, share in zip(ids, self.shares):
            flat = flat * share + s
        return flat


def compute_ids(relation: Relation, shares: tuple[int, ...], hashes) -> np.ndarray:
    """Per-row partition identifier tuples, one column per attribute.

    hashes is one callable per attribute (the variable hash bound to that
    attribute position).  Data-parallel over rows; a single vectorized pass
    suffices here.
    """
    n, k = relation.data.shape
    ids = np.empty((n, k), dtype=np.uint32)
    for c in range(k):
        ids[:, c] = hashes[c](relation.data[:, c])
    return ids


def histogram_and_prefix(ids: np.ndarray, shares: tuple[int, ...]):
    """Partition sizes and their exclusive prefix sums, lexicographic order.

    Single-threaded on purpose: it is a tiny fraction of preprocessing.
    The offset table carries a final sentinel entry equal to the row count.
    """
    total = 1
    for s in shares:
        total *= s
    n = ids.shape[0]
    if n == 0:
        hist = np.zeros(total, dtype=np.int64)
        return hist, np.zeros(total + 1, dtype=np.int64)
    flat = np.ravel_multi_index(
        tuple(ids[:, c].astype(np.int64) for c in range(ids.shape[1])), shares
    )
    hist = np.bincount(flat, minlength=total).astype(np.int64)
    offsets = np.zeros(total + 1, dtype=np.int64)
    np.cumsum(hist, out=offsets[1:])
    return hist, offsets


def _worker_blocks(hist: np.ndarray, workers: int) -> list[tuple[int, int]]:
    """Contiguous partition-index blocks with roughly balanced row mass."""
    total = int(hist.sum())
    n_parts = len(hist)
    workers = max(1, min(workers, n_parts))
    blocks = []
    start = 0
    remaining = total
    for w in range(workers):
        if start >= n_parts:
            break
        target = remaining / (workers - w) if workers - w else remaining
        acc = 0
        end = start
        while end < n_parts and (acc < target or end == start):
            acc += int(hist[end])
            end += 1
        # Leave at least one partition per remaining worker.
        end = min(end, n_parts - (workers - w - 1) + 0) if w < workers - 1 else n_parts
        end = max(end, start + 1)
        blocks.append((start, end))
        remaining -= int(hist[start:end].sum())
        start = end
    if blocks:
        blocks[-1] = (blocks[-1][0], n_parts)
    return blocks


def scatter(relation: Relation, ids: np.ndarray, offsets: np.ndarray,
            shares: tuple[int, ...], workers: int = 1) -> PartitionedRelation:
    """Copy rows into their partitions' contiguous regions.

    Each worker owns an exclusive block of partitions, scans the whole id
    array, and copies only the rows belonging to its block, so no two
    workers write the same region and the result is identical for any
    worker count.  Workers are capped at the physical core count because
    every worker reads the entire id array.
    """
    n, k = relation.data.shape
    out = np.empty_like(relation.data)
    if n == 0:
        return PartitionedRelation(out, offsets.copy(), shares, tuple(range(k)))
    flat = np.ravel_multi_index(
        tuple(ids[:, c].astype(np.int64) for c in range(ids.shape[1])), shares
    )
    hist = np.diff(offsets)
    workers = max(1, min(workers, physical_core_count()))
    blocks = _worker_blocks(hist, workers)

    def copy_block(block):
        lo, hi = block
        mask = (flat >= lo) & (flat < hi)
        rows = relation.data[mask]
        # Stable sort by partition id keeps the source scan order within
        # each partition, matching a sequential scan-and-append.
        order = np.argsort(flat[mask], kind="stable")
        out[offsets[lo]:offsets[hi]] = rows[order]

    if len(blocks) == 1:
        copy_block(blocks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            list(pool.map(copy_block, blocks))
    return PartitionedRelation(out, offsets.copy(), shares, tuple(range(k)))


def sort_partitions(pr: PartitionedRelation, order: tuple[int, ...],
                    workers: int = 1, force: str | None = None) -> PartitionedRelation:
    """Sort each partition lexicographically by the attribute permutation.

    With at least as many partitions as workers, partitions are sorted
    independently (in parallel); otherwise one sort keyed by (partition id,
    permuted row) over the whole array keeps partitions together.  Both
    strategies produce identical arrays; `force` pins one for testing
    ("per_partition" or "joint").
    """
    n, k = pr.data.shape
    if sorted(order) != list(range(k)):
        raise ConfigError(f"order {order} is not an attribute permutation")
    data = pr.data.copy()
    strategy = force
    if strategy is None:
        strategy = "per_partition" if pr.num_partitions >= workers else "joint"

    if n:
        if strategy == "joint":
            sizes = np.diff(pr.offsets)
            pid = np.repeat(np.arange(pr.num_partitions), sizes)
            keys = [data[:, c] for c in reversed(order)]
            keys.append(pid)
            perm = np.lexsort(keys)
            data = data[perm]
        else:
            def sort_one(p):
                lo, hi = pr.offsets[p], pr.offsets[p + 1]
                if hi - lo > 1:
                    seg = data[lo:hi]
                    perm = np.lexsort([seg[:, c] for c in reversed(order)])
                    data[lo:hi] = seg[perm]

            parts = [p for p in range(pr.num_partitions)
                     if pr.offsets[p + 1] - pr.offsets[p] > 1]
            if workers > 1 and len(parts) > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    list(pool.map(sort_one, parts))
            else:
                for p in parts:
                    sort_one(p)
    data.setflags(write=False)
    return PartitionedRelation(data, pr.offsets, pr.shares, tuple(order))
