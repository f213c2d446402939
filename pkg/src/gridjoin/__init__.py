"""gridjoin: a shared-memory parallel worst-case optimal join engine.

Every join variable's domain is hash-partitioned into a power-of-two number
of buckets (its share); one logical task runs generic join per point of the
resulting grid, over per-partition sorted compressed-column trie indexes,
with a cost model choosing the variable order and shares and a rewriter
hoisting loop-invariant intersections.
"""

from .coco import CocoIndex, build as build_coco, child_range, enumerate_rows
from .executor import Prepared, ResultSet, prepare, resolve_partition, run, run_task
from .intersect import SortedView, StepCounter, multiway, search
from .model import (
    Atom,
    Catalog,
    ConfigError,
    EngineError,
    FormatError,
    OutputMode,
    ParseError,
    Query,
    Relation,
    RunConfig,
    SchemaError,
    emit_job,
    load_binary,
    load_csv,
    make_relation,
    parse_job,
    parse_query_text,
    write_binary,
)
from .optimizer import (
    CostReport,
    HoistedIntersection,
    Plan,
    Statistics,
    chain_bound,
    chain_bounds,
    choose_plan,
    collect_stats,
    detect_rewrites,
    evenness,
    level_cost,
    share_compositions,
    total_cost,
)
from .oracle import OracleGuardError, evaluate as oracle_evaluate
from .partition import (
    HashFamily,
    MappingHash,
    PartitionedRelation,
    ShareVector,
    VariableHash,
    compute_ids,
    histogram_and_prefix,
    scatter,
    sort_partitions,
)

__version__ = "0.1.0"

__all__ = [
    "Atom", "Catalog", "CocoIndex", "ConfigError", "CostReport",
    "EngineError", "FormatError", "HashFamily", "HoistedIntersection",
    "MappingHash", "OracleGuardError", "OutputMode", "ParseError",
    "PartitionedRelation", "Plan", "Prepared", "Query", "Relation",
    "ResultSet", "RunConfig", "SchemaError", "ShareVector", "SortedView",
    "Statistics", "StepCounter", "VariableHash", "build_coco",
    "chain_bound", "chain_bounds", "child_range", "choose_plan",
    "collect_stats", "compute_ids", "detect_rewrites", "emit_job",
    "enumerate_rows", "evenness", "histogram_and_prefix", "level_cost",
    "load_binary", "load_csv", "make_relation", "multiway",
    "oracle_evaluate", "parse_job", "parse_query_text", "prepare",
    "resolve_partition", "run", "run_task", "scatter", "search",
    "share_compositions", "sort_partitions", "total_cost", "write_binary",
]
