"""Brute-force conjunctive-query evaluation, the ground truth for tests.

Joins atoms in input order by backtracking: every partial binding is
checked against a full scan of the next atom, filtered on the variables
already bound.  Deliberately shares no code with the join engine so that a
disagreement localizes the bug.  The scans are vectorized in chunks, but
the algorithm is the plain nested one.
"""

from __future__ import annotations

import numpy as np

from .model import Catalog, EngineError, Query

DEFAULT_STEP_BUDGET = 10**9
_CHUNK_CELLS = 10**7


class OracleGuardError(EngineError):
    """The instance exceeded the nested-loop step budget."""


def evaluate(query: Query, catalog: Catalog,
             step_budget: int = DEFAULT_STEP_BUDGET) -> np.ndarray:
    """All satisfying bindings, deduplicated and sorted, in head-var order.

    Refuses (raises OracleGuardError) once the accumulated scan work
    exceeds step_budget row checks; that marks a test-configuration error,
    not a data error.
    """
    bound_vars: list[str] = []
    bindings = np.empty((1, 0), dtype=np.uint64)
    steps = 0

    for atom in query.atoms:
        rel = catalog.resolve(atom)
        data = rel.data
        n_rows = data.shape[0]
        n_bind = bindings.shape[0]
        if n_bind == 0:
            bindings = np.empty((0, len(bound_vars)), dtype=np.uint64)
            break
        steps += n_bind * max(n_rows, 1)
        if steps > step_budget:
            raise OracleGuardError(
                f"oracle budget exceeded ({steps} > {step_budget} row checks)")

        bound_cols = [(c, bound_vars.index(v))
                      for c, v in enumerate(atom.vars) if v in bound_vars]
        free_cols = [c for c, v in enumerate(atom.vars) if v not in bound_vars]

        if n_rows == 0:
            bindings = np.empty((0, len(bound_vars) + len(free_cols)),
                                dtype=np.uint64)
            bound_vars.extend(atom.vars[c] for c in free_cols)
            continue

        chunk = max(1, _CHUNK_CELLS // n_rows)
        pieces = []
        for lo in range(0, n_bind, chunk):
            sub = bindings[lo:lo + chunk]
            if bound_cols:
                mask = np.ones((sub.shape[0], n_rows), dtype=bool)
                for c, bi in bound_cols:
                    mask &= sub[:, bi][:, None] == data[:, c][None, :]
            else:
                mask = np.ones((sub.shape[0], n_rows), dtype=bool)
            b_idx, r_idx = np.nonzero(mask)
            piece = np.concatenate(
                [sub[b_idx], data[r_idx][:, free_cols]], axis=1)
            pieces.append(piece)
        bindings = (np.concatenate(pieces) if pieces
                    else np.empty((0, len(bound_vars) + len(free_cols)),
                                  dtype=np.uint64))
        bound_vars.extend(atom.vars[c] for c in free_cols)

    if bindings.shape[0] == 0:
        return np.empty((0, len(query.variables)), dtype=np.uint64)
    cols = [bound_vars.index(v) for v in query.variables]
    return np.unique(bindings[:, cols], axis=0)


def count(query: Query, catalog: Catalog,
          step_budget: int = DEFAULT_STEP_BUDGET) -> int:
    return int(evaluate(query, catalog, step_budget).shape[0])
