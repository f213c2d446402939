"""Build a compressed-column trie and navigate it.

The index stores one sorted value array per level plus child offsets;
a value's children at the next level live in one contiguous range, so
the whole trie is a handful of flat arrays.
"""

import numpy as np

import gridjoin as gj

rows = np.array([(1, 2, 5), (1, 4, 5), (2, 4, 1), (2, 4, 3)], dtype=np.uint64)
print("sorted rows:", rows.tolist())

idx = gj.build_coco(rows)
for r, level in enumerate(idx.levels):
    print(f"level {r}: values={level.values} offsets={level.offsets}")
# Note the repeated 4 on level 1: one per parent (1 and 2) - values are
# distinct only within a parent's child range.

# Navigation: the children of the value at position p of level r.
pos = idx.levels[0].values.index(2)
lo, hi = gj.child_range(idx, 0, pos)
print(f"children of top-level value 2: positions [{lo}, {hi}) ->",
      idx.levels[1].values[lo:hi])

# Depth-first expansion reproduces the distinct sorted rows exactly; this
# roundtrip is the construction oracle the tests lean on.
print("enumerated:", gj.enumerate_rows(idx).tolist())
assert np.array_equal(gj.enumerate_rows(idx), rows)

# Intersections run over views of these arrays.  Intersect the Y-children
# of X=1 with the Y-children of X=2:
r1 = gj.child_range(idx, 0, 0)
r2 = gj.child_range(idx, 0, 1)
views = [gj.SortedView(idx.levels[1].values, *r1),
         gj.SortedView(idx.levels[1].values, *r2)]
common = [v for v, _ in gj.multiway(views)]
print("Y values shared by X=1 and X=2:", common)
