"""Parallel generic join over partitioned trie indexes.

One logical task exists per point of the share grid; a task joins the
partitions its coordinates select, runs the nested intersection loops with
any hoisted-intersection caches the plan scheduled, and buffers results
locally.  All shared state is immutable after preparation, so tasks need no
locks; a process pool executes them with dynamic chunking and the merge
step is a deterministic reduction in task-id order.
"""

from __future__ import annotations

import math
import multiprocessing
import time
from dataclasses import dataclass

import numpy as np

from . import coco
from .intersect import (SortedView, StepCounter, count_common, intersect_all,
                        multiway)
from .model import Catalog, Query
from .optimizer import Plan, _level_inputs
from .partition import (HashFamily, PartitionedRelation, compute_ids,
                        histogram_and_prefix, scatter, sort_partitions)
from .util import physical_core_count


@dataclass
class AtomRuntime:
    """One atom's partitioned, sorted, and indexed relation."""

    atom_index: int
    relation: str
    vars: tuple[str, ...]
    shares: tuple[int, ...]          # per attribute, attribute order
    perm: tuple[int, ...]            # attribute columns in order-sorted sequence
    partitioned: PartitionedRelation
    indices: list[coco.CocoIndex]

    def flat_partition(self, coords_by_var: dict[str, int]) -> int:
        flat = 0
        for c, share in enumerate(self.shares):
            flat = flat * share + (coords_by_var[self.vars[c]] % share)
        return flat


@dataclass(frozen=True)
class _AtomSource:
    atom: int        # index into Prepared.atoms
    trie_level: int  # level of this variable inside the atom's trie


@dataclass(frozen=True)
class _TempSource:
    slot: int        # index into the task's temp cache


@dataclass(frozen=True)
class _HoistProgram:
    slot: int
    placement: int
    sources: tuple[_AtomSource, ...]


@dataclass
class _LevelProgram:
    sources: list  # _AtomSource | _TempSource, fixed deterministic order
    hoists: list[_HoistProgram]  # materialized on entering this depth


@dataclass
class Prepared:
    """Everything the tasks share read-only."""

    query: Query
    plan: Plan
    order: tuple[str, ...]
    shares: tuple[int, ...]
    atoms: list[AtomRuntime]
    levels: list[_LevelProgram]
    pre_hoists: list[_HoistProgram]   # placement 0, before the outer loop
    head_map: tuple[int, ...]         # order positions of the head variables
    num_tasks: int


@dataclass
class TaskStats:
    task_id: int
    steps: int
    emitted: int
    wall_nanos: int


@dataclass
class LevelStats:
    """Exact per-level sums for validating the cost-model inequality."""

    entries: int = 0
    sum_min: float = 0.0
    sum_max: float = 0.0
    sum_cost: float = 0.0
    num_sources: int = 0


@dataclass
class ResultSet:
    mode: str
    count: int = 0
    tuples: np.ndarray | None = None
    task_stats: list[TaskStats] | None = None
    level_stats: list[LevelStats] | None = None

    def sorted_tuples(self) -> np.ndarray:
        if self.tuples is None or self.tuples.shape[0] == 0:
            return self.tuples
        return np.unique(self.tuples, axis=0)


def prepare(query: Query, catalog: Catalog, plan: Plan, workers: int = 1,
            seed: int = 0) -> Prepared:
    """Partition, sort, and index every atom's relation under the plan."""
    order = plan.order
    pos = {v: i for i, v in enumerate(order)}
    share_of = {v: s for v, s in zip(plan.shares.variables, plan.shares.shares)}
    # Seed streams follow the query's variable order so that one hash family
    # serves every candidate plan.
    family = HashFamily.from_seed({v: share_of[v] for v in query.variables}, seed)

    atoms: list[AtomRuntime] = []
    for j, atom in enumerate(query.atoms):
        rel = catalog.resolve(atom)
        shares = tuple(share_of[v] for v in atom.vars)
        hashes = [family[v] for v in atom.vars]
        ids = compute_ids(rel, shares, hashes)
        _, offsets = histogram_and_prefix(ids, shares)
        pr = scatter(rel, ids, offsets, shares, workers)
        perm = tuple(sorted(range(len(atom.vars)), key=lambda c: pos[atom.vars[c]]))
        pr = sort_partitions(pr, perm, workers)
        indices = [
            coco.build(pr.partition_slice(p)[:, perm],
                       omit_last_offsets=rel.deduplicated)
            for p in range(pr.num_partitions)
        ]
        atoms.append(AtomRuntime(j, atom.relation, atom.vars, shares, perm,
                                 pr, indices))

    hoists = plan.rewrites
    inputs = _level_inputs(query, order, hoists)
    temp_slot = {h.target_level: s for s, h in enumerate(hoists)}

    def atom_source(j: int, var: str) -> _AtomSource:
        rt = atoms[j]
        trie_level = rt.perm.index(rt.vars.index(var))
        return _AtomSource(j, trie_level)

    programs = [
        _HoistProgram(temp_slot[h.target_level], h.placement,
                      tuple(atom_source(j, h.target_var) for j in h.sources))
        for h in hoists
    ]
    levels: list[_LevelProgram] = []
    for i, var in enumerate(order):
        atom_js, temp = inputs[i]
        sources: list = [atom_source(j, var) for j in atom_js]
        if temp is not None:
            sources.append(_TempSource(temp_slot[i]))
        levels.append(_LevelProgram(sources, []))
    # Placement depth d means: materialize after binding levels 0..d-1,
    # i.e. on entering depth d.  Depth 0 runs once at task start.
    pre_hoists: list[_HoistProgram] = []
    for prog in programs:
        if prog.placement == 0:
            pre_hoists.append(prog)
        else:
            levels[prog.placement].hoists.append(prog)

    head_map = tuple(pos[v] for v in query.variables)
    num_tasks = 1
    for s in plan.shares.shares:
        num_tasks *= s
    return Prepared(query, plan, order, plan.shares.shares, atoms, levels,
                    pre_hoists, head_map, num_tasks)


def task_coords(prepared: Prepared, task_id: int) -> tuple[int, ...]:
    """Row-major grid coordinates (s_1..s_n) of a flat task id."""
    coords = []
    rem = task_id
    for s in reversed(prepared.shares):
        coords.append(rem % s)
        rem //= s
    return tuple(reversed(coords))


def resolve_partition(prepared: Prepared, coords: tuple[int, ...], atom: int):
    """Project task coordinates onto one atom: (partition rows, its index)."""
    pos = {v: i for i, v in enumerate(prepared.order)}
    rt = prepared.atoms[atom]
    by_var = {v: coords[pos[v]] for v in rt.vars}
    flat = rt.flat_partition(by_var)
    return rt.partitioned.partition_slice(flat), rt.indices[flat]


def run_task(prepared: Prepared, task_id: int, mode: str = "count",
             counter: StepCounter | None = None,
             level_stats: list[LevelStats] | None = None):
    """Execute the nested intersection loops for one grid point.

    Returns (count, tuples or None); bindings are emitted in lexicographic
    order of the plan's variable order and converted to head-variable order.
    """
    coords = task_coords(prepared, task_id)
    pos = {v: i for i, v in enumerate(prepared.order)}
    n = len(prepared.order)

    indices: list[coco.CocoIndex] = []
    for rt in prepared.atoms:
        by_var = {v: coords[pos[v]] for v in rt.vars}
        indices.append(rt.indices[rt.flat_partition(by_var)])

    # Current value-range per (atom, trie level); level 0 spans the whole
    # partition index, deeper levels are set as parents get bound.
    ranges: list[list] = []
    for j, rt in enumerate(prepared.atoms):
        idx = indices[j]
        r0 = (0, len(idx.levels[0].values))
        ranges.append([r0] + [None] * (idx.arity - 1))

    temps: list = [None] * len(prepared.plan.rewrites)
    bindings = [0] * n
    head_map = prepared.head_map
    want_tuples = mode != "count"
    out: list[tuple[int, ...]] = []
    emitted = 0

    def materialize(prog: _HoistProgram):
        views = []
        for src in prog.sources:
            idx = indices[src.atom]
            lvl = idx.levels[src.trie_level]
            b, e = ranges[src.atom][src.trie_level]
            views.append(SortedView(lvl.values, b, e))
        values, positions = intersect_all(views, counter)
        temps[prog.slot] = (values, positions, prog.sources)

    def source_views(level: int):
        views = []
        for src in prepared.levels[level].sources:
            if isinstance(src, _AtomSource):
                idx = indices[src.atom]
                b, e = ranges[src.atom][src.trie_level]
                views.append(SortedView(idx.levels[src.trie_level].values, b, e))
            else:
                values, _, _ = temps[src.slot]
                views.append(SortedView(values, 0, len(values)))
        return views

    def record_level(level: int, views):
        stats = level_stats[level]
        sizes = []
        for src, view in zip(prepared.levels[level].sources, views):
            if isinstance(src, _AtomSource):
                idx = indices[src.atom]
                if src.trie_level == 0:
                    sizes.append(idx.num_rows)
                else:
                    pre = idx.row_prefix(src.trie_level)
                    sizes.append(pre[view.end] - pre[view.begin])
            else:
                sizes.append(len(view))
        lo, hi = min(sizes), max(sizes)
        stats.entries += 1
        stats.num_sources = len(sizes)
        stats.sum_min += lo
        stats.sum_max += hi
        if lo > 0:
            stats.sum_cost += len(sizes) * lo * math.log2(1.0 + hi / lo)

    def descend(level: int, value: int, positions):
        bindings[level] = value
        for src, p in zip(prepared.levels[level].sources, positions):
            if isinstance(src, _AtomSource):
                idx = indices[src.atom]
                nxt = src.trie_level + 1
                if nxt < idx.arity:
                    offs = idx.levels[src.trie_level].offsets
                    ranges[src.atom][nxt] = (offs[p], offs[p + 1])
            else:
                values, positions_per_source, sources = temps[src.slot]
                for s_idx, asrc in enumerate(sources):
                    idx = indices[asrc.atom]
                    nxt = asrc.trie_level + 1
                    if nxt < idx.arity:
                        p2 = positions_per_source[s_idx][p]
                        offs = idx.levels[asrc.trie_level].offsets
                        ranges[asrc.atom][nxt] = (offs[p2], offs[p2 + 1])

    def recurse(level: int):
        nonlocal emitted
        for prog in prepared.levels[level].hoists:
            materialize(prog)
        views = source_views(level)
        if level_stats is not None:
            record_level(level, views)
        if level == n - 1:
            if want_tuples:
                for value, positions in multiway(views, counter):
                    bindings[level] = value
                    emitted += 1
                    out.append(tuple(bindings[m] for m in head_map))
            else:
                # Nothing descends below the last level: count in place.
                emitted += count_common(views, counter)
        else:
            nxt = level + 1
            for value, positions in multiway(views, counter):
                descend(level, value, positions)
                recurse(nxt)

    for prog in prepared.pre_hoists:
        materialize(prog)
    recurse(0)
    return emitted, (out if want_tuples else None)


_WORKER_PREPARED: Prepared | None = None
_WORKER_ARGS: tuple | None = None


def _pool_run(task_id: int):
    prepared = _WORKER_PREPARED
    mode, instrument = _WORKER_ARGS
    counter = StepCounter() if instrument else None
    t0 = time.perf_counter_ns()
    emitted, tuples = run_task(prepared, task_id, mode, counter)
    nanos = time.perf_counter_ns() - t0
    steps = counter.steps if counter else 0
    return task_id, emitted, tuples, steps, nanos


def run(prepared: Prepared, mode: str = "count", workers: int | None = None,
        instrument: bool = False,
        level_stats: bool = False) -> ResultSet:
    """Schedule all grid tasks on a worker pool and merge their results.

    The union over tasks partitions the answer exactly (every variable is
    hashed), so counts add and tuple buffers concatenate; merging follows
    task-id order, making the result identical for any worker count.
    """
    global _WORKER_PREPARED, _WORKER_ARGS
    if workers is None:
        workers = physical_core_count()
    task_ids = range(prepared.num_tasks)

    stats_per_level = None
    if level_stats:
        stats_per_level = [LevelStats() for _ in prepared.order]

    results = {}
    if workers <= 1 or prepared.num_tasks == 1 or level_stats:
        for t in task_ids:
            counter = StepCounter() if instrument else None
            t0 = time.perf_counter_ns()
            emitted, tuples = run_task(prepared, t, mode, counter,
                                       stats_per_level)
            nanos = time.perf_counter_ns() - t0
            results[t] = (emitted, tuples, counter.steps if counter else 0,
                          nanos)
    else:
        _WORKER_PREPARED = prepared
        _WORKER_ARGS = (mode, instrument)
        try:
            ctx = multiprocessing.get_context("fork")
            chunk = max(1, prepared.num_tasks // (workers * 8))
            with ctx.Pool(workers) as pool:
                for t, emitted, tuples, steps, nanos in pool.imap_unordered(
                        _pool_run, task_ids, chunksize=chunk):
                    results[t] = (emitted, tuples, steps, nanos)
        except (ValueError, OSError):
            # No fork support: degrade to sequential execution.
            for t in task_ids:
                counter = StepCounter() if instrument else None
                t0 = time.perf_counter_ns()
                emitted, tuples = run_task(prepared, t, mode, counter)
                nanos = time.perf_counter_ns() - t0
                results[t] = (emitted, tuples,
                              counter.steps if counter else 0, nanos)
        finally:
            _WORKER_PREPARED = None
            _WORKER_ARGS = None

    rs = ResultSet(mode=mode)
    all_tuples: list = []
    task_stats: list[TaskStats] = []
    for t in sorted(results):
        emitted, tuples, steps, nanos = results[t]
        rs.count += emitted
        if tuples:
            all_tuples.extend(tuples)
        if instrument:
            task_stats.append(TaskStats(t, steps, emitted, nanos))
    if mode != "count":
        n = len(prepared.query.variables)
        rs.tuples = np.asarray(all_tuples, dtype=np.uint64).reshape(-1, n)
    if instrument:
        rs.task_stats = task_stats
    rs.level_stats = stats_per_level
    return rs
