"""Statistics, the per-level cost model, rewriting, and plan search.

The planner enumerates variable orders together with power-of-two share
allocations over the thread budget P, prices each candidate with a
per-level upper-bound cost derived from a degree-chain cardinality bound,
prunes allocations whose replicated work exceeds twice the unpartitioned
cost or that over-partition a small domain, and breaks near-ties (within a
2x cost band) by an evenness score that spreads shares with a bias toward
later variables.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import Catalog, ConfigError, Query
from .partition import ShareVector

logger = logging.getLogger(__name__)

EXHAUSTIVE_ORDER_MAX = 8  # beyond this, orders are grown greedily
MAX_VARIABLES = 12
COST_PRUNE_FACTOR = 2.0
DOMAIN_PRUNE_FACTOR = 3  # share P_i needs |Dom(X_i)| >= 3 * P_i * log2(P_i)


class Statistics:
    """Cardinalities, per-column distinct counts, and lazy degree bounds.

    Degree queries are memoized; after construction the object is safe to
    read from any number of threads.
    """

    def __init__(self, catalog: Catalog):
        self._data = {name: rel.data for name, rel in catalog.relations.items()}
        self._card = {name: int(d.shape[0]) for name, d in self._data.items()}
        self._distinct: dict[tuple[str, tuple[int, ...]], int] = {}
        self._maxdeg: dict[tuple[str, int, tuple[int, ...]], int] = {}
        for name, d in self._data.items():
            for c in range(d.shape[1]):
                self.distinct(name, (c,))

    def cardinality(self, rel: str) -> int:
        return self._card[rel]

    def distinct(self, rel: str, attrs: tuple[int, ...]) -> int:
        """Distinct count of the projection onto the given attribute set."""
        attrs = tuple(sorted(attrs))
        key = (rel, attrs)
        got = self._distinct.get(key)
        if got is not None:
            return got
        data = self._data[rel]
        if data.shape[0] == 0:
            n = 0
        elif not attrs:
            n = 1
        else:
            n = int(np.unique(data[:, attrs], axis=0).shape[0])
        self._distinct[key] = n
        return n

    def maxdeg(self, rel: str, attr: int, bound: tuple[int, ...]) -> int:
        """Max distinct values of `attr` over any binding of `bound` attrs.

        An empty bound set degenerates to the distinct count of the column.
        Monotone: growing the bound set never increases the result.
        """
        bound = tuple(sorted(set(bound) - {attr}))
        key = (rel, attr, bound)
        got = self._maxdeg.get(key)
        if got is not None:
            return got
        data = self._data[rel]
        if data.shape[0] == 0:
            deg = 0
        elif not bound:
            deg = self.distinct(rel, (attr,))
        else:
            pairs = np.unique(data[:, bound + (attr,)], axis=0)
            _, counts = np.unique(pairs[:, : len(bound)], axis=0,
                                  return_counts=True)
            deg = int(counts.max())
        self._maxdeg[key] = deg
        return deg

    def avg_degree(self, rel: str, attr: int, bound: tuple[int, ...]) -> float:
        """Average distinct `attr` values per bound-attribute binding.

        With a single bound column this is |R| / |R.X|; with no bound
        columns it is the column's distinct count.
        """
        bound = tuple(sorted(set(bound) - {attr}))
        denom = self.distinct(rel, bound) if bound else 1
        if denom == 0:
            return 0.0
        return self.distinct(rel, bound + (attr,)) / denom


def collect_stats(catalog: Catalog) -> Statistics:
    return Statistics(catalog)


def chain_bounds(query: Query, order: tuple[str, ...], stats: Statistics) -> list[float]:
    """Cumulative degree-chain cardinality bounds B_1..B_n along the order.

    B_i multiplies B_{i-1} by the smallest conditional max-degree among the
    atoms containing the i-th variable; a sound, monotone upper bound on
    the prefix-query output size.
    """
    bounds = []
    b = 1.0
    seen: set[str] = set()
    for var in order:
        degs = []
        for j in query.atoms_with(var):
            atom = query.atoms[j]
            attr = atom.vars.index(var)
            bnd = tuple(c for c, v in enumerate(atom.vars) if v in seen)
            degs.append(stats.maxdeg(atom.relation, attr, bnd))
        b *= min(degs)
        bounds.append(b)
        seen.add(var)
    return bounds


def chain_bound(query: Query, prefix: tuple[str, ...], stats: Statistics) -> float:
    """Upper bound on the prefix query's output size."""
    if not prefix:
        raise ConfigError("chain_bound needs a nonempty prefix")
    return chain_bounds(query, prefix, stats)[-1]


def level_cost(num_sources: int, sum_min: float, avg_degrees: list[float]) -> float:
    """Eq-style per-level bound: |S| * (sum min N) * log2(1 + max N / min N).

    The max/min ratio is estimated from the sources' average degrees; an
    empty level (sum_min or some average degree zero) costs nothing.
    """
    if sum_min <= 0 or not avg_degrees:
        return 0.0
    lo, hi = min(avg_degrees), max(avg_degrees)
    if lo <= 0:
        return 0.0
    return num_sources * sum_min * math.log2(1.0 + hi / lo)


@dataclass(frozen=True)
class HoistedIntersection:
    """A loop-invariant intersection lifted to an earlier depth.

    The temporary is materialized once per binding of the first `placement`
    order variables and replaces its sources at the target level.
    """

    target_var: str
    target_level: int     # 0-based position in the order
    sources: tuple[int, ...]  # atom indices, >= 2 of them
    placement: int        # depth: 0 = before the outermost loop


def detect_rewrites(query: Query, order: tuple[str, ...]) -> list[HoistedIntersection]:
    """Group each level's sources that ignore the immediately-enclosing loop.

    At level i, sources whose bound variables all sit strictly above level
    i-1 can be intersected once per binding of their deepest dependency;
    one hoist per level, only when at least two sources qualify.
    """
    pos = {v: i for i, v in enumerate(order)}
    hoists = []
    for i, var in enumerate(order):
        group = []
        deepest = -1
        for j in query.atoms_with(var):
            deps = [pos[v] for v in query.atoms[j].vars if pos[v] < i]
            top = max(deps) if deps else -1
            if top <= i - 2:
                group.append(j)
                deepest = max(deepest, top)
        if len(group) >= 2:
            hoists.append(HoistedIntersection(var, i, tuple(group), deepest + 1))
    return hoists


@dataclass(frozen=True)
class HoistCost:
    placement: int
    target_level: int
    cost: float


@dataclass(frozen=True)
class CostReport:
    """Per-level bounds plus the share-replicated total and evenness."""

    level_costs: tuple[float, ...]
    hoist_costs: tuple[HoistCost, ...]
    total_unpartitioned: float
    total_partitioned: float
    evenness: float


def evenness(shares: tuple[int, ...]) -> float:
    """E = sum_i P_i * w(i), w(i) = max(1 - i/100, 3/4), i counted from 1."""
    return sum(p * max(1.0 - (i + 1) / 100.0, 0.75) for i, p in enumerate(shares))


def _level_inputs(query: Query, order, hoists):
    """Per level: (atom sources, temp sources) after rewrite replacement."""
    hoisted_at: dict[int, HoistedIntersection] = {h.target_level: h for h in hoists}
    removed: dict[int, set[int]] = {
        h.target_level: set(h.sources) for h in hoists
    }
    per_level = []
    for i, var in enumerate(order):
        atoms = [j for j in query.atoms_with(var)
                 if j not in removed.get(i, ())]
        per_level.append((atoms, hoisted_at.get(i)))
    return per_level


def _plan_costs(query: Query, order: tuple[str, ...], stats: Statistics,
                hoists: list[HoistedIntersection]):
    """Level cost vector and hoist cost terms for one candidate order."""
    pos = {v: i for i, v in enumerate(order)}
    bounds = chain_bounds(query, order, stats)

    def source_avg(j: int, var: str) -> float:
        atom = query.atoms[j]
        attr = atom.vars.index(var)
        bnd = tuple(c for c, v in enumerate(atom.vars) if pos[v] < pos[var])
        return stats.avg_degree(atom.relation, attr, bnd)

    def source_maxdeg(j: int, var: str) -> int:
        atom = query.atoms[j]
        attr = atom.vars.index(var)
        bnd = tuple(c for c, v in enumerate(atom.vars) if pos[v] < pos[var])
        return stats.maxdeg(atom.relation, attr, bnd)

    level_costs = []
    inputs = _level_inputs(query, order, hoists)
    for i, var in enumerate(order):
        atoms, temp = inputs[i]
        avgs = [source_avg(j, var) for j in atoms]
        n_sources = len(atoms)
        if temp is not None:
            avgs.append(min(source_avg(j, var) for j in temp.sources))
            n_sources += 1
        level_costs.append(level_cost(n_sources, bounds[i], avgs))

    hoist_costs = []
    for h in hoists:
        prefix_bound = bounds[h.placement - 1] if h.placement > 0 else 1.0
        step = min(source_maxdeg(j, h.target_var) for j in h.sources)
        avgs = [source_avg(j, h.target_var) for j in h.sources]
        cost = level_cost(len(h.sources), prefix_bound * step, avgs)
        hoist_costs.append(HoistCost(h.placement, h.target_level, cost))
    return level_costs, hoist_costs


def total_cost(level_costs, hoist_costs, shares: tuple[int, ...]) -> float:
    """Replicated total: each term is multiplied by the product of the
    shares of the variables ordered after it; the hoisted temporary's own
    variable share splits its work, so it is excluded from the factor."""
    n = len(shares)
    suffix = [1] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] * shares[i]
    total = 0.0
    for i, c in enumerate(level_costs):
        total += suffix[i + 1] * c
    for h in hoist_costs:
        factor = suffix[h.placement] // shares[h.target_level]
        total += max(factor, 1) * h.cost
    return total


def share_compositions(total: int, n: int):
    """All ways to split log2(total) among n variables, as share tuples."""
    e = total.bit_length() - 1
    for cuts in itertools.combinations(range(e + n - 1), n - 1):
        parts = []
        prev = -1
        for c in cuts:
            parts.append(c - prev - 1)
            prev = c
        parts.append(e + n - 2 - prev)
        yield tuple(1 << p for p in parts)


@dataclass
class Plan:
    """Chosen variable order, shares, rewrite schedule, and its pricing."""

    order: tuple[str, ...]
    shares: ShareVector
    rewrites: list[HoistedIntersection]
    cost: CostReport
    stats: "PlanSearchStats" = None  # type: ignore[assignment]


@dataclass
class PlanSearchStats:
    orders_tried: int = 0
    share_candidates: int = 0
    pruned_by_cost: int = 0
    pruned_by_domain: int = 0
    fell_back: bool = False


def _domains(query: Query, stats: Statistics) -> dict[str, int]:
    # The iterated domain of a variable is at most its smallest column.
    dom = {}
    for var in query.variables:
        sizes = []
        for j in query.atoms_with(var):
            atom = query.atoms[j]
            sizes.append(stats.distinct(atom.relation, (atom.vars.index(var),)))
        dom[var] = min(sizes)
    return dom


def _greedy_order(query: Query, stats: Statistics) -> tuple[str, ...]:
    """Grow the order one variable at a time by smallest incremental cost."""
    remaining = list(query.variables)
    order: list[str] = []
    while remaining:
        best = None
        for var in remaining:
            cand = tuple(order) + (var,)
            lc, hc = _plan_costs(query, cand + tuple(
                v for v in remaining if v != var), stats, [])
            score = sum(lc[: len(cand)])
            if best is None or score < best[0]:
                best = (score, var)
        order.append(best[1])
        remaining.remove(best[1])
    return tuple(order)


def choose_plan(query: Query, stats: Statistics, threads: int,
                order_override: tuple[str, ...] | None = None,
                shares_override: dict[str, int] | None = None,
                rewrite: bool = True) -> Plan:
    """Joint order/share search with pruning and the evenness tie-break.

    Explicit overrides bypass the corresponding enumeration (and, for
    shares, the prunes).  Among surviving candidates the minimum-cost one
    defines a 2x band; within the band the smallest evenness wins, with
    residual ties broken lexicographically for determinism.
    """
    n = len(query.variables)
    if n > MAX_VARIABLES:
        raise ConfigError(f"too many variables ({n} > {MAX_VARIABLES})")
    if threads < 1 or threads & (threads - 1):
        raise ConfigError(f"thread count must be a power of two, got {threads}")

    if shares_override is not None:
        got = 1
        for v in shares_override.values():
            got *= v
        # Unlisted variables implicitly get share 1.
        if got != threads:
            raise ConfigError(
                f"explicit shares multiply to {got}, expected {threads}")

    if order_override is not None:
        orders = [tuple(order_override)]
    elif n <= EXHAUSTIVE_ORDER_MAX:
        orders = [tuple(p) for p in itertools.permutations(query.variables)]
    else:
        orders = [_greedy_order(query, stats)]

    dom = _domains(query, stats)
    search = PlanSearchStats(orders_tried=len(orders))

    candidates = []
    priced: dict[tuple[str, ...], tuple] = {}
    for order in orders:
        hoists = detect_rewrites(query, order) if rewrite else []
        lc, hc = _plan_costs(query, order, stats, hoists)
        base = total_cost(lc, hc, (1,) * n)
        priced[order] = (hoists, lc, hc, base)

        if shares_override is not None:
            share_list = [tuple(shares_override.get(v, 1) for v in order)]
            forced = True
        else:
            share_list = list(share_compositions(threads, n))
            forced = False
        search.share_candidates = len(share_list)
        for shares in share_list:
            if not forced:
                pruned = False
                for var, p in zip(order, shares):
                    if p > 1 and dom[var] < DOMAIN_PRUNE_FACTOR * p * math.log2(p):
                        pruned = True
                        break
                if pruned:
                    search.pruned_by_domain += 1
                    continue
            total = total_cost(lc, hc, shares)
            if not forced and total > COST_PRUNE_FACTOR * base:
                search.pruned_by_cost += 1
                continue
            candidates.append((total, evenness(shares), order, shares))

    if not candidates:
        best_order = min(orders, key=lambda o: (priced[o][3], o))
        hoists, lc, hc, base = priced[best_order]
        shares = (threads,) + (1,) * (n - 1)
        logger.warning(
            "all share candidates pruned; falling back to order %s with "
            "shares %s", best_order, shares)
        search.fell_back = True
        report = CostReport(tuple(lc), tuple(hc), base,
                            total_cost(lc, hc, shares), evenness(shares))
        return Plan(best_order, ShareVector(best_order, shares), hoists,
                    report, search)

    cmin = min(c[0] for c in candidates)
    band = [c for c in candidates if c[0] <= COST_PRUNE_FACTOR * cmin]
    total, even, order, shares = min(band, key=lambda c: (c[1], c[0], c[2], c[3]))
    hoists, lc, hc, base = priced[order]
    report = CostReport(tuple(lc), tuple(hc), base, total, even)
    return Plan(order, ShareVector(order, shares), hoists, report, search)
