"""Compressed-column trie index over one sorted partition.

Level r holds every distinct r-prefix's last component in one sorted array
V_r, plus an offset array O_r of length len(V_r)+1 addressing the children
in level r+1.  The last level's offsets address rows of the partition and
can be omitted for duplicate-free relations.  Built eagerly in two passes
over the sorted rows; immutable afterwards, so executor tasks share it
without coordination.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CocoError(ValueError):
    """Construction or navigation contract violation."""


@dataclass
class CocoLevel:
    values: list[int]
    offsets: list[int] | None  # None only on the last level when omitted


@dataclass
class CocoIndex:
    levels: list[CocoLevel]
    arity: int
    num_rows: int
    _row_prefix: dict[int, list[int]] = field(default_factory=dict, repr=False)

    @property
    def distinct_rows(self) -> int:
        return len(self.levels[-1].values)

    def row_prefix(self, level: int) -> list[int]:
        """Cumulative source-row counts per entry of a level.

        row_prefix(r)[e] - row_prefix(r)[b] is the number of partition rows
        covered by entries [b, e) of level r; used by the cost-model
        instrumentation to read off restricted cardinalities.
        """
        cached = self._row_prefix.get(level)
        if cached is not None:
            return cached
        k = self.arity
        last = self.levels[k - 1]
        if last.offsets is not None:
            counts = np.diff(np.asarray(last.offsets, dtype=np.int64))
        else:
            counts = np.ones(len(last.values), dtype=np.int64)
        for r in range(k - 1, level, -1):
            off = np.asarray(self.levels[r - 1].offsets, dtype=np.int64)
            cum = np.concatenate([[0], np.cumsum(counts)])
            counts = cum[off[1:]] - cum[off[:-1]]
        prefix = np.concatenate([[0], np.cumsum(counts)]).tolist()
        self._row_prefix[level] = prefix
        return prefix


def _is_lex_sorted(rows: np.ndarray) -> bool:
    if rows.shape[0] < 2:
        return True
    a, b = rows[:-1], rows[1:]
    neq = a != b
    first = np.argmax(neq, axis=1)
    any_diff = neq.any(axis=1)
    idx = np.arange(rows.shape[0] - 1)
    lt = a[idx, first] <= b[idx, first]
    return bool(np.all(~any_diff | lt))


def build(rows: np.ndarray, omit_last_offsets: bool = False) -> CocoIndex:
    """Compress sorted rows into per-level value and offset arrays.

    Pass 1 counts the distinct prefixes per level to size the arrays; pass 2
    walks adjacent row pairs, finds the first differing attribute e, and
    appends one entry at every level from e to the last.  Here both passes
    are the same vectorized boundary computation.
    """
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise CocoError(f"rows must be 2-d, got shape {rows.shape}")
    n, k = rows.shape
    if k < 1:
        raise CocoError("arity must be >= 1")
    if __debug__ and not _is_lex_sorted(rows):
        raise CocoError("partition rows are not lexicographically sorted")

    if n == 0:
        levels = [CocoLevel([], [0]) for _ in range(k)]
        if omit_last_offsets:
            levels[-1].offsets = None
        return CocoIndex(levels, k, 0)

    # changed[i, r] is True when row i+1 starts a new (r+1)-prefix; boundary
    # sets grow with r, so every level-r boundary also bounds level r+1.
    if n > 1:
        changed = np.logical_or.accumulate(rows[1:] != rows[:-1], axis=1)
    else:
        changed = np.zeros((0, k), dtype=bool)
    bounds = [
        np.concatenate([[0], np.flatnonzero(changed[:, r]) + 1]) for r in range(k)
    ]

    levels: list[CocoLevel] = []
    for r in range(k):
        values = rows[bounds[r], r].tolist()
        if r + 1 < k:
            offs = np.searchsorted(bounds[r + 1], bounds[r])
            offsets = np.concatenate([offs, [len(bounds[r + 1])]]).tolist()
        else:
            offsets = None if omit_last_offsets else \
                np.concatenate([bounds[r], [n]]).tolist()
        levels.append(CocoLevel(values, offsets))
    return CocoIndex(levels, k, n)


def child_range(index: CocoIndex, level: int, pos: int) -> tuple[int, int]:
    """Half-open range of children in level+1 for entry pos of level."""
    lvl = index.levels[level]
    if lvl.offsets is None:
        raise CocoError("child_range on the last level with omitted offsets")
    if not 0 <= pos < len(lvl.values):
        raise CocoError(f"position {pos} out of range at level {level}")
    return lvl.offsets[pos], lvl.offsets[pos + 1]


def enumerate_rows(index: CocoIndex) -> np.ndarray:
    """Depth-first expansion back to the sorted distinct rows.

    The roundtrip enumerate_rows(build(rows)) == unique(rows) is the
    construction oracle used throughout the tests.
    """
    k = index.arity
    m = index.distinct_rows
    out = np.empty((m, k), dtype=np.uint64)
    if m == 0:
        return out
    out[:, k - 1] = index.levels[k - 1].values
    leaf_counts = np.ones(m, dtype=np.int64)
    for r in range(k - 2, -1, -1):
        off = np.asarray(index.levels[r].offsets, dtype=np.int64)
        cum = np.concatenate([[0], np.cumsum(leaf_counts)])
        leaf_counts = cum[off[1:]] - cum[off[:-1]]
        out[:, r] = np.repeat(
            np.asarray(index.levels[r].values, dtype=np.uint64), leaf_counts
        )
    return out
