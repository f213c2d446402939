"""Task resolution, generic-join execution, and parallel-run tests."""

import numpy as np
import pytest

import gridjoin as gj
from conftest import CLIQUE_REWRITE_TEXT, QUERY_TEXTS, random_graph, run_engine


def triangle_setup(threads, shares=None, workers=1):
    rel = gj.make_relation("E", 2, [(1, 2), (2, 3), (1, 3), (3, 1), (2, 1)])
    query = gj.parse_query_text(QUERY_TEXTS["triangle"])
    catalog = gj.Catalog({"R": rel, "S": rel, "T": rel})
    stats = gj.collect_stats(catalog)
    plan = gj.choose_plan(query, stats, threads, shares_override=shares,
                          order_override=("X", "Y", "Z"))
    prepared = gj.prepare(query, catalog, plan, workers=workers)
    return query, catalog, prepared


def test_resolve_partition_projects_coordinates():
    _, _, prepared = triangle_setup(8, shares={"X": 2, "Y": 2, "Z": 2})
    coords = (1, 0, 1)
    # R(X,Y) sees (s_X, s_Y); S(Y,Z) sees (s_Y, s_Z); T(X,Z) sees (s_X, s_Z).
    for atom, expect in [(0, (1, 0)), (1, (0, 1)), (2, (1, 1))]:
        rt = prepared.atoms[atom]
        flat = rt.flat_partition({v: c for v, c in zip(("X", "Y", "Z"), coords)
                                  if v in rt.vars})
        lex = 0
        for s, share in zip(expect, rt.shares):
            lex = lex * share + s
        assert flat == lex
        rows, idx = gj.resolve_partition(prepared, coords, atom)
        assert rows.shape[0] == idx.num_rows


def test_resolve_partition_degenerate_grid():
    _, _, prepared = triangle_setup(1)
    rows, idx = gj.resolve_partition(prepared, (0, 0, 0), 0)
    assert rows.shape[0] == 5  # the whole relation


def test_share_one_collapses_coordinate():
    _, _, prepared = triangle_setup(4, shares={"X": 2, "Y": 2, "Z": 1})
    a, _ = gj.resolve_partition(prepared, (1, 0, 0), 2)  # T(X,Z)
    assert prepared.atoms[2].shares == (2, 1)


def test_run_task_triangle_counts():
    _, _, prepared = triangle_setup(1)
    emitted, tuples = gj.run_task(prepared, 0, mode="tuples")
    assert emitted == 3
    assert sorted(tuples) == [(1, 2, 3), (2, 1, 3), (2, 3, 1)]


def test_empty_partition_no_bindings():
    rel = gj.make_relation("E", 2, np.empty((0, 2), dtype=np.uint64))
    query = gj.parse_query_text(QUERY_TEXTS["triangle"])
    catalog = gj.Catalog({"R": rel, "S": rel, "T": rel})
    rs = run_engine(query, catalog, 1)
    assert rs.count == 0
    assert rs.tuples.shape == (0, 3)


def test_union_of_tasks_partitions_answer():
    rng = np.random.default_rng(23)
    rel = random_graph(23, nodes=60, edges=500)
    query = gj.parse_query_text(QUERY_TEXTS["triangle"])
    catalog = gj.Catalog({"R": rel, "S": rel, "T": rel})
    ref = gj.oracle_evaluate(query, catalog)
    for shares in ({"X": 8}, {"Y": 4, "Z": 2}, {"X": 2, "Y": 2, "Z": 2}):
        stats = gj.collect_stats(catalog)
        plan = gj.choose_plan(query, stats, 8, shares_override=shares)
        prepared = gj.prepare(query, catalog, plan)
        per_task = [gj.run_task(prepared, t, mode="tuples")
                    for t in range(prepared.num_tasks)]
        all_rows = [tuple(r) for _, rows in per_task for r in rows]
        # Tasks are pairwise disjoint and their union is exactly the answer.
        assert len(all_rows) == len(set(all_rows))
        assert sorted(all_rows) == list(map(tuple, ref.tolist()))


def test_single_task_equals_run():
    _, _, prepared = triangle_setup(1)
    emitted, tuples = gj.run_task(prepared, 0, mode="tuples")
    rs = gj.run(prepared, mode="tuples", workers=1)
    assert rs.count == emitted
    assert sorted(map(tuple, rs.tuples.tolist())) == sorted(tuples)


@pytest.mark.parametrize("workers", [1, 2, 8])
def test_worker_counts_identical(workers):
    rel = random_graph(9, nodes=80, edges=800)
    query = gj.parse_query_text(QUERY_TEXTS["triangle"])
    catalog = gj.Catalog({"R": rel, "S": rel, "T": rel})
    rs = run_engine(query, catalog, 8, shares={"X": 2, "Y": 2, "Z": 2},
                    workers=workers)
    ref = run_engine(query, catalog, 8, shares={"X": 2, "Y": 2, "Z": 2},
                     workers=1)
    assert rs.count == ref.count
    assert np.array_equal(rs.sorted_tuples(), ref.sorted_tuples())


def test_rewrite_differential_four_clique():
    query = gj.parse_query_text(CLIQUE_REWRITE_TEXT)
    rel = random_graph(31, nodes=200, edges=2000)
    catalog = gj.Catalog({a.relation: rel for a in query.atoms})
    with_rw = run_engine(query, catalog, 1, order=("X", "Y", "Z", "U"),
                         rewrite=True, instrument=True)
    without = run_engine(query, catalog, 1, order=("X", "Y", "Z", "U"),
                         rewrite=False, instrument=True)
    assert np.array_equal(with_rw.sorted_tuples(), without.sorted_tuples())
    assert sum(t.steps for t in with_rw.task_stats) <= \
        sum(t.steps for t in without.task_stats)


def test_hoist_caches_partitioned_grid():
    # Hoisted temporaries must stay consistent under partitioning too.
    query = gj.parse_query_text(CLIQUE_REWRITE_TEXT)
    rel = random_graph(37, nodes=100, edges=1500)
    catalog = gj.Catalog({a.relation: rel for a in query.atoms})
    ref = gj.oracle_evaluate(query, catalog)
    rs = run_engine(query, catalog, 16, order=("X", "Y", "Z", "U"),
                    shares={"X": 2, "Y": 2, "Z": 2, "U": 2}, rewrite=True)
    assert np.array_equal(rs.sorted_tuples(), ref)


def test_count_mode_matches_tuple_mode():
    rel = random_graph(4, nodes=100, edges=1000)
    query = gj.parse_query_text(QUERY_TEXTS["triangle"])
    catalog = gj.Catalog({"R": rel, "S": rel, "T": rel})
    counted = run_engine(query, catalog, 8, shares={"X": 8}, mode="count")
    tupled = run_engine(query, catalog, 8, shares={"X": 8}, mode="tuples")
    assert counted.count == tupled.count == tupled.tuples.shape[0]


def test_task_stats_cover_grid():
    rel = random_graph(2, nodes=50, edges=300)
    query = gj.parse_query_text(QUERY_TEXTS["triangle"])
    catalog = gj.Catalog({"R": rel, "S": rel, "T": rel})
    rs = run_engine(query, catalog, 8, shares={"X": 2, "Y": 2, "Z": 2},
                    instrument=True)
    assert len(rs.task_stats) == 8
    assert [t.task_id for t in rs.task_stats] == list(range(8))
    assert sum(t.emitted for t in rs.task_stats) == rs.count


def test_ternary_engine_matches_oracle():
    query = gj.parse_query_text(QUERY_TEXTS["clover"])
    rng = np.random.default_rng(5)
    catalog = gj.Catalog({
        a.relation: gj.make_relation(
            a.relation, 3, rng.integers(0, 15, (400, 3), dtype=np.uint64))
        for a in query.atoms
    })
    ref = gj.oracle_evaluate(query, catalog)
    rs = run_engine(query, catalog, 8, shares={"U": 2, "X": 2, "Y": 2})
    assert np.array_equal(rs.sorted_tuples(), ref)
