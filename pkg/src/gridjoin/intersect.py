"""Sorted-array search kernels and the multiway intersection loop.

Every generic-join level iterates the common values of a set of strictly
increasing segments.  The kernels below keep one monotone cursor per
segment: while the cursor values disagree, the minimum cursor seeks forward
to the current maximum; when they agree the value is emitted and every
cursor advances.  Seeks pick linear, quadratic, or exponential probing by
the remaining segment length.

Instrumentation: when a StepCounter is supplied, every comparator
invocation (probe comparisons in the seeks plus cursor min/max comparisons)
is counted.  These step counts are the machine-independent work figure used
by the bench reports and the cost-model checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

LINEAR_MAX = 32
QUADRATIC_MAX = 1024
QUADRATIC_STRIDE = 8  # one 64-byte line of 8-byte values

LINEAR = "linear"
QUADRATIC = "quadratic"
EXPONENTIAL = "exponential"


class StepCounter:
    """Mutable comparator-invocation tally, one per task."""

    __slots__ = ("steps",)

    def __init__(self):
        self.steps = 0


@dataclass(slots=True)
class SortedView:
    """A strictly increasing segment values[begin:end]; may be empty."""

    values: Sequence[int]
    begin: int
    end: int

    def __len__(self) -> int:
        return self.end - self.begin


def select_strategy(remaining: int) -> str:
    """Pure function of the remaining view length; thresholds are tunable."""
    if remaining <= LINEAR_MAX:
        return LINEAR
    if remaining <= QUADRATIC_MAX:
        return QUADRATIC
    return EXPONENTIAL


def _linear(seq, lo: int, hi: int, x) -> tuple[int, int]:
    c = 0
    p = lo
    while p < hi:
        c += 1
        if seq[p] >= x:
            break
        p += 1
    return p, c


def _quadratic(seq, lo: int, hi: int, x) -> tuple[int, int]:
    # One stride pass, then a linear scan inside the overshot stride.
    c = 0
    low = lo
    scan_hi = hi
    q = lo + QUADRATIC_STRIDE
    while q < hi:
        c += 1
        if seq[q] >= x:
            scan_hi = q
            break
        low = q + 1
        q += QUADRATIC_STRIDE
    p = low
    while p < scan_hi:
        c += 1
        if seq[p] >= x:
            return p, c
        p += 1
    # Nothing in [low, scan_hi): the stride probe (if any) is the answer.
    return (scan_hi if scan_hi < hi else hi), c


def _exponential(seq, lo: int, hi: int, x) -> tuple[int, int]:
    # Gallop in doubling jumps, then binary search the overshot range.
    if lo >= hi:
        return hi, 0
    c = 1
    if seq[lo] >= x:
        return lo, c
    bound = 1
    while lo + bound < hi:
        c += 1
        if seq[lo + bound] >= x:
            break
        bound <<= 1
    low = lo + (bound >> 1) + 1
    high = min(lo + bound, hi - 1) + 1
    while low < high:
        mid = (low + high) >> 1
        c += 1
        if seq[mid] < x:
            low = mid + 1
        else:
            high = mid
    return low, c


_SEARCHERS = {LINEAR: _linear, QUADRATIC: _quadratic, EXPONENTIAL: _exponential}


def search(view: SortedView, x, strategy: str | None = None,
           counter: StepCounter | None = None) -> int:
    """Position of the first element >= x in the view, or len(view) if none.

    All three strategies return identical positions; the position is
    relative to the view's begin.
    """
    lo, hi = view.begin, view.end
    if strategy is None:
        strategy = select_strategy(hi - lo)
    p, c = _SEARCHERS[strategy](view.values, lo, hi, x)
    if counter is not None:
        counter.steps += c
    return p - view.begin


def multiway(views: list[SortedView],
             counter: StepCounter | None = None) -> Iterator[tuple[int, tuple[int, ...]]]:
    """Ascending common values of the views with their per-view positions.

    Positions are absolute indices into each view's underlying array so the
    caller can follow child ranges or cache offsets.  Seeks always restart
    from the current cursor, never from the segment start.
    """
    k = len(views)
    if k == 0:
        return
    seqs = [v.values for v in views]
    pos = [v.begin for v in views]
    ends = [v.end for v in views]
    for i in range(k):
        if pos[i] >= ends[i]:
            return

    if k == 1:
        seq0, end0 = seqs[0], ends[0]
        p = pos[0]
        while p < end0:
            yield seq0[p], (p,)
            p += 1
        return

    vals = [seqs[i][pos[i]] for i in range(k)]
    c = 0
    while True:
        mn = mx = vals[0]
        mni = 0
        for i in range(1, k):
            v = vals[i]
            c += 1
            if v < mn:
                mn = v
                mni = i
            else:
                c += 1
                if v > mx:
                    mx = v
        if mn == mx:
            if counter is not None:
                counter.steps += c
                c = 0
            yield mn, tuple(pos)
            for i in range(k):
                p = pos[i] + 1
                if p >= ends[i]:
                    return
                pos[i] = p
                vals[i] = seqs[i][p]
        else:
            i = mni
            lo = pos[i] + 1
            hi = ends[i]
            strat = select_strategy(hi - lo)
            p, sc = _SEARCHERS[strat](seqs[i], lo, hi, mx)
            c += sc
            if p >= hi:
                if counter is not None:
                    counter.steps += c
                return
            pos[i] = p
            vals[i] = seqs[i][p]


def intersect_all(views: list[SortedView],
                  counter: StepCounter | None = None):
    """Materialize a multiway intersection: values plus per-view positions."""
    values: list[int] = []
    positions: list[list[int]] = [[] for _ in views]
    for v, ps in multiway(views, counter):
        values.append(v)
        for i, p in enumerate(ps):
            positions[i].append(p)
    return values, positions


def count_common(views: list[SortedView],
                 counter: StepCounter | None = None) -> int:
    """Number of common values; same cursor algorithm, no materialization.

    Innermost loops emit nothing downstream, so counting them avoids the
    per-value generator cost.  Two views (the overwhelmingly common case)
    get a dedicated loop.
    """
    k = len(views)
    if k == 0:
        return 0
    for v in views:
        if v.begin >= v.end:
            return 0
    if k == 1:
        return views[0].end - views[0].begin
    if k != 2:
        total = 0
        for _ in multiway(views, counter):
            total += 1
        return total

    a, b = views[0].values, views[1].values
    pa, ea = views[0].begin, views[0].end
    pb, eb = views[1].begin, views[1].end
    va, vb = a[pa], b[pb]
    total = 0
    c = 0
    while True:
        c += 1
        if vb < va:
            lo = pb + 1
            strat = select_strategy(eb - lo)
            pb, sc = _SEARCHERS[strat](b, lo, eb, va)
            c += sc
            if pb >= eb:
                break
            vb = b[pb]
        else:
            c += 1
            if va < vb:
                lo = pa + 1
                strat = select_strategy(ea - lo)
                pa, sc = _SEARCHERS[strat](a, lo, ea, vb)
                c += sc
                if pa >= ea:
                    break
                va = a[pa]
            else:
                total += 1
                pa += 1
                pb += 1
                if pa >= ea or pb >= eb:
                    break
                va = a[pa]
                vb = b[pb]
    if counter is not None:
        counter.steps += c
    return total
