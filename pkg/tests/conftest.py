"""Shared instance generators and engine-run helpers."""

from __future__ import annotations

import numpy as np
import pytest

import gridjoin as gj

# The benchmark query shapes: binary-atom graph patterns plus two ternary
# (hypergraph) kernels.  Binary atoms all read the same edge relation.
QUERY_TEXTS = {
    "triangle": "Q(X,Y,Z) :- R(X,Y), S(Y,Z), T(X,Z).",
    "four_loop": "Q(X,Y,Z,U) :- R1(X,Y), R2(X,Z), R3(Y,U), R4(Z,U).",
    "diamond": "Q(X,Y,Z,U) :- R1(X,Y), R2(X,Z), R3(Y,U), R4(Z,U), R5(Y,Z).",
    "four_clique": ("Q(X,Y,Z,U) :- R1(X,Y), R2(X,Z), R3(Y,U), R4(Z,U), "
                    "R5(Y,Z), R6(X,U)."),
    "two_triangle": ("Q(X,Y,Z,U,V) :- R1(X,Y), R2(X,Z), R3(Y,Z), R4(Z,U), "
                     "R5(Z,V), R6(U,V)."),
    "loomis_whitney": ("Q(X,Y,Z,U) :- R1(X,Y,Z), R2(X,Y,U), R3(X,Z,U), "
                       "R4(Y,Z,U)."),
    "clover": "Q(U,X,Y,Z) :- R5(U,X,Y), R6(U,X,Z), R7(U,Y,Z).",
}

# The hoisting example query: a 4-clique written with the variable pairs
# laid out so every level of order X,Y,Z,U has one loop-invariant pair.
CLIQUE_REWRITE_TEXT = ("Q(X,Y,Z,U) :- R1(X,Y), R2(X,Z), R3(X,U), R4(Y,Z), "
                       "R5(Y,U), R6(Z,U).")


def random_graph(seed: int, nodes: int = 200, edges: int = 2000,
                 symmetrize: bool = False) -> gj.Relation:
    rng = np.random.default_rng(seed)
    data = rng.integers(0, nodes, size=(edges, 2), dtype=np.uint64)
    if symmetrize:
        data = np.concatenate([data, data[:, ::-1]])
    return gj.make_relation("E", 2, data)


def random_ternary(seed: int, rows: int = 1000, domain: int = 20) -> gj.Relation:
    rng = np.random.default_rng(seed)
    data = rng.integers(0, domain, size=(rows, 3), dtype=np.uint64)
    return gj.make_relation("T", 3, data)


def instance(name: str, seed: int):
    """(query, catalog) for a named query shape on a random instance."""
    query = gj.parse_query_text(QUERY_TEXTS[name])
    arity = len(query.atoms[0].vars)
    catalog = gj.Catalog()
    if arity == 2:
        rel = random_graph(seed)
        for atom in query.atoms:
            catalog.relations[atom.relation] = rel
    else:
        for i, atom in enumerate(query.atoms):
            catalog.relations[atom.relation] = random_ternary(seed * 101 + i)
    return query, catalog


def zipf_graph(seed: int, nodes: int, edges: int, exponent: float = 1.2,
               dst: str = "uniform") -> gj.Relation:
    """Directed graph whose source popularity follows a Zipf rank law.

    Each edge draws its source from a Zipf(exponent) rank distribution
    truncated to the node universe (so a handful of hubs own a large
    fraction of the out-edges) and its destination either uniformly or
    from the same law; self loops are dropped and duplicates removed,
    sampling until the requested edge count is reached exactly.
    """
    rng = np.random.default_rng(seed)
    ranks = np.arange(1, nodes + 1, dtype=np.float64)
    probs = ranks ** (-exponent)
    probs /= probs.sum()
    seen = np.empty((0, 2), dtype=np.uint64)
    while seen.shape[0] < edges:
        need = max(edges - seen.shape[0], 1)
        size = int(need * 1.5) + 16
        src = rng.choice(nodes, size=size, p=probs).astype(np.uint64)
        if dst == "uniform":
            dst_col = rng.integers(0, nodes, size=size, dtype=np.uint64)
        else:
            dst_col = rng.choice(nodes, size=size, p=probs).astype(np.uint64)
        draw = np.stack([src, dst_col], axis=1)
        draw = draw[draw[:, 0] != draw[:, 1]]
        seen = np.unique(np.concatenate([seen, draw]), axis=0)
    # Deterministic trim to the exact edge count.
    order = rng.permutation(seen.shape[0])[:edges]
    return gj.make_relation("E", 2, seen[np.sort(order)])


def triangle_catalog(rel: gj.Relation):
    query = gj.parse_query_text(QUERY_TEXTS["triangle"])
    return query, gj.Catalog({"R": rel, "S": rel, "T": rel})


def run_engine(query, catalog, threads: int = 1, *, shares=None, order=None,
               rewrite: bool = True, workers: int | None = 1, seed: int = 0,
               mode: str = "tuples", instrument: bool = False,
               level_stats: bool = False):
    """Plan (with optional overrides), prepare, and run; returns ResultSet."""
    from gridjoin.util import physical_core_count
    if workers is None:
        workers = physical_core_count()
    stats = gj.collect_stats(catalog)
    plan = gj.choose_plan(query, stats, threads, order_override=order,
                          shares_override=shares, rewrite=rewrite)
    prepared = gj.prepare(query, catalog, plan, workers=workers, seed=seed)
    return gj.run(prepared, mode=mode, workers=workers, instrument=instrument,
                  level_stats=level_stats)


def share_maps(query, threads: int):
    """A few distinct share assignments for a thread budget, as var maps."""
    n = len(query.variables)
    e = threads.bit_length() - 1
    if threads == 1:
        return [dict.fromkeys(query.variables, 1)]
    picks = []
    first = {v: 1 for v in query.variables}
    first[query.variables[0]] = threads
    picks.append(first)
    last = {v: 1 for v in query.variables}
    last[query.variables[-1]] = threads
    picks.append(last)
    balanced = {}
    base, extra = divmod(e, n)
    for i, v in enumerate(query.variables):
        balanced[v] = 1 << (base + (1 if i < extra else 0))
    picks.append(balanced)
    return picks


@pytest.fixture(scope="session")
def tmp_workspace(tmp_path_factory):
    return tmp_path_factory.mktemp("jobs")
