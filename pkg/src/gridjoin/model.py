"""Relations, conjunctive queries, catalogs, and job-file ingestion.

Values are dictionary-encoded unsigned 64-bit integers; string keys must be
encoded by an external step.  Relations are immutable after loading and safe
to read from any number of threads.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

BINARY_MAGIC = b"HCRL"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sHHIQ")  # magic, version, flags, arity, row count
FLAG_DEDUPLICATED = 0x1

DEFAULT_THREADS = 1024


class EngineError(Exception):
    """Base class for all engine errors."""


class ConfigError(EngineError):
    """Invalid job file, query text, or run configuration."""


class ParseError(ConfigError):
    """Malformed CSV input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class SchemaError(ConfigError):
    """Arity or variable-shape violation."""


class FormatError(ConfigError):
    """Corrupt or unrecognized binary relation file."""


@dataclass(frozen=True)
class Relation:
    """A set of k-ary rows stored row-major as an (N, k) uint64 array."""

    name: str
    arity: int
    data: np.ndarray
    deduplicated: bool = False

    def __post_init__(self):
        if self.arity < 1:
            raise SchemaError(f"relation {self.name}: arity must be >= 1")
        if self.data.ndim != 2 or self.data.shape[1] != self.arity:
            raise SchemaError(
                f"relation {self.name}: data shape {self.data.shape} does not "
                f"match arity {self.arity}"
            )

    @property
    def cardinality(self) -> int:
        return self.data.shape[0]


def make_relation(name: str, arity: int, rows, deduplicate: bool = True) -> Relation:
    """Build a Relation from any row iterable; deduplicates by default."""
    data = np.asarray(rows, dtype=np.uint64).reshape(-1, arity)
    if deduplicate and data.shape[0]:
        data = np.unique(data, axis=0)
    data.setflags(write=False)
    return Relation(name, arity, data, deduplicated=deduplicate)


@dataclass(frozen=True)
class Atom:
    """One relational term R(X_1..X_k) of a conjunctive query."""

    relation: str
    vars: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.vars)) != len(self.vars):
            raise ConfigError(
                f"atom {self.relation}({','.join(self.vars)}): repeated "
                "variables within one atom are not supported"
            )


@dataclass(frozen=True)
class Query:
    """Full conjunctive query: every head variable occurs in some atom."""

    atoms: tuple[Atom, ...]
    variables: tuple[str, ...]

    def __post_init__(self):
        if not self.atoms or not self.variables:
            raise ConfigError("query needs at least one atom and one variable")
        body_vars = {v for a in self.atoms for v in a.vars}
        for v in self.variables:
            if v not in body_vars:
                raise ConfigError(f"variable {v} occurs in no atom")
        for v in sorted(body_vars):
            if v not in self.variables:
                raise ConfigError(
                    f"body variable {v} missing from the head: projections "
                    "are not supported"
                )

    def atoms_with(self, var: str) -> list[int]:
        return [j for j, a in enumerate(self.atoms) if var in a.vars]


@dataclass
class Catalog:
    """Maps relation names to loaded relations; several atoms may share one."""

    relations: dict[str, Relation] = field(default_factory=dict)

    def add(self, rel: Relation) -> None:
        self.relations[rel.name] = rel

    def resolve(self, atom: Atom) -> Relation:
        try:
            rel = self.relations[atom.relation]
        except KeyError:
            raise ConfigError(f"unknown relation {atom.relation}") from None
        if rel.arity != len(atom.vars):
            raise SchemaError(
                f"atom {atom.relation}({','.join(atom.vars)}) does not match "
                f"relation arity {rel.arity}"
            )
        return rel


@dataclass(frozen=True)
class OutputMode:
    kind: str = "count"  # count | tuples | file
    path: str | None = None


@dataclass
class RunConfig:
    """Execution knobs carried by the job file plus CLI overrides."""

    threads: int = DEFAULT_THREADS
    workers: int | None = None  # resolved to physical cores at run time
    output: OutputMode = field(default_factory=OutputMode)
    order: tuple[str, ...] | None = None
    shares: dict[str, int] | None = None
    rewrite: bool = True
    instrument: bool = False
    seed: int = 0
    symmetrize: bool = False

    def __post_init__(self):
        if self.threads < 1 or self.threads & (self.threads - 1):
            raise ConfigError(f"threads must be a power of two, got {self.threads}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


def load_csv(path, arity: int, symmetrize: bool = False) -> Relation:
    """Load comma-separated unsigned integers (no header, LF or CRLF).

    The result is deduplicated; with symmetrize and arity 2, the mirrored
    edge (b, a) is added for every input edge (a, b).
    """
    if symmetrize and arity != 2:
        raise SchemaError("symmetrize requires arity 2")
    path = Path(path)
    rows = []
    with open(path, "r", newline="") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != arity:
                raise SchemaError(
                    f"{path}: line {lineno}: expected {arity} fields, "
                    f"got {len(parts)}"
                )
            try:
                row = [int(p) for p in parts]
            except ValueError:
                raise ParseError(f"{path}: non-integer field in {line!r}", lineno)
            if any(v < 0 or v > 0xFFFFFFFFFFFFFFFF for v in row):
                raise ParseError(f"{path}: value out of unsigned 64-bit range", lineno)
            rows.append(row)
    data = np.asarray(rows, dtype=np.uint64).reshape(-1, arity)
    if symmetrize and data.shape[0]:
        data = np.concatenate([data, data[:, ::-1]])
    if data.shape[0]:
        data = np.unique(data, axis=0)
    data.setflags(write=False)
    return Relation(path.stem, arity, data, deduplicated=True)


def write_binary(rel: Relation, path) -> None:
    flags = FLAG_DEDUPLICATED if rel.deduplicated else 0
    with open(path, "wb") as f:
        f.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, flags, rel.arity,
                             rel.cardinality))
        f.write(np.ascontiguousarray(rel.data, dtype="<u8").tobytes())


def load_binary(path) -> Relation:
    """Load the binary relation format (see write_binary)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, flags, arity, count = _HEADER.unpack_from(raw)
    if magic != BINARY_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != BINARY_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if arity < 1:
        raise FormatError(f"{path}: bad arity {arity}")
    need = _HEADER.size + 8 * arity * count
    if len(raw) < need:
        raise FormatError(f"{path}: truncated data ({len(raw)} < {need} bytes)")
    data = np.frombuffer(raw, dtype="<u8", count=arity * count,
                         offset=_HEADER.size).reshape(count, arity)
    data = data.astype(np.uint64, copy=True)
    deduplicated = bool(flags & FLAG_DEDUPLICATED)
    if not deduplicated and count:
        data = np.unique(data, axis=0)
    data.setflags(write=False)
    return Relation(path.stem, arity, data, deduplicated=True)


_ATOM_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*\(([^)]*)\)")


def parse_query_text(text: str) -> Query:
    """Parse 'Q(X,Y,Z) :- R(X,Y), S(Y,Z), T(X,Z).' (':=' also accepted)."""
    text = text.strip().rstrip(".")
    for sep in (":-", ":="):
        if sep in text:
            head_text, body_text = text.split(sep, 1)
            break
    else:
        raise ConfigError(f"query {text!r}: missing ':-' between head and body")
    head = _ATOM_RE.fullmatch(head_text.strip())
    if not head:
        raise ConfigError(f"query head {head_text.strip()!r} is not NAME(vars)")
    variables = tuple(v.strip() for v in head.group(2).split(",") if v.strip())
    atoms = []
    for m in _ATOM_RE.finditer(body_text):
        vars_ = tuple(v.strip() for v in m.group(2).split(",") if v.strip())
        atoms.append(Atom(m.group(1), vars_))
    if not atoms:
        raise ConfigError(f"query {text!r}: empty body")
    return Query(tuple(atoms), variables)


def query_to_text(query: Query) -> str:
    body = ", ".join(f"{a.relation}({','.join(a.vars)})" for a in query.atoms)
    return f"Q({','.join(query.variables)}) :- {body}."


def _parse_output(raw) -> OutputMode:
    if raw is None or raw == "count":
        return OutputMode("count")
    if raw == "tuples":
        return OutputMode("tuples")
    if isinstance(raw, dict) and "file" in raw:
        return OutputMode("file", str(raw["file"]))
    raise ConfigError(f"output must be 'count', 'tuples', or {{'file': path}}: {raw!r}")


def parse_job(path) -> tuple[Query, Catalog, RunConfig]:
    """Load a JSON job file plus the relation files it references.

    Relation paths are resolved relative to the job file's directory; the
    relation's arity is taken from the atoms referencing it.
    """
    path = Path(path)
    try:
        job = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from None
    if "query" not in job or "relations" not in job:
        raise ConfigError(f"{path}: job needs 'query' and 'relations'")

    query = parse_query_text(job["query"])

    threads = int(job.get("threads", DEFAULT_THREADS))
    symmetrize = bool(job.get("symmetrize", False))
    order = tuple(job["order"]) if job.get("order") else None
    if order is not None and sorted(order) != sorted(query.variables):
        raise ConfigError(f"order {order} is not a permutation of the query variables")
    shares = None
    if job.get("shares"):
        shares = {str(k): int(v) for k, v in job["shares"].items()}
        for v, s in shares.items():
            if v not in query.variables:
                raise ConfigError(f"share for unknown variable {v}")
            if s < 1 or s & (s - 1):
                raise ConfigError(f"share for {v} must be a power of two, got {s}")
    output = _parse_output(job.get("output"))
    if output.kind == "file":
        # Like relation files, the output path is job-directory relative.
        output = OutputMode("file", str(path.parent / output.path))
    config = RunConfig(
        threads=threads,
        output=output,
        order=order,
        shares=shares,
        rewrite=bool(job.get("rewrite", True)),
        symmetrize=symmetrize,
    )

    arity_by_rel: dict[str, int] = {}
    for atom in query.atoms:
        k = len(atom.vars)
        prev = arity_by_rel.setdefault(atom.relation, k)
        if prev != k:
            raise ConfigError(
                f"relation {atom.relation} used with arities {prev} and {k}"
            )

    catalog = Catalog()
    rel_paths = job["relations"]
    for name, k in arity_by_rel.items():
        if name not in rel_paths:
            raise ConfigError(f"no file given for relation {name}")
        rel_path = path.parent / rel_paths[name]
        rel = _load_relation_file(rel_path, k)
        if symmetrize and k == 2:
            rel = make_relation(name, 2,
                                np.concatenate([rel.data, rel.data[:, ::-1]])
                                if rel.cardinality else rel.data)
        elif symmetrize and k != 2:
            raise ConfigError(f"symmetrize requires arity 2, {name} has arity {k}")
        else:
            rel = replace(rel, name=name)
        catalog.add(rel)
    for atom in query.atoms:
        catalog.resolve(atom)
    return query, catalog, config


def _load_relation_file(rel_path: Path, arity: int) -> Relation:
    if not rel_path.exists():
        raise ConfigError(f"relation file not found: {rel_path}")
    if rel_path.suffix == ".csv":
        rel = load_csv(rel_path, arity)
    else:
        rel = load_binary(rel_path)
    if rel.arity != arity:
        raise SchemaError(
            f"{rel_path}: file has arity {rel.arity}, query expects {arity}"
        )
    return rel


def emit_job(query: Query, config: RunConfig, relation_paths: dict[str, str]) -> str:
    """Serialize (query, config, file map) back to job-file JSON.

    parse_job(emit_job(q, c)) reproduces (q, c) for every well-formed job.
    """
    job: dict = {
        "query": query_to_text(query),
        "relations": dict(relation_paths),
        "threads": config.threads,
        "symmetrize": config.symmetrize,
        "rewrite": config.rewrite,
    }
    if config.output.kind == "file":
        job["output"] = {"file": config.output.path}
    else:
        job["output"] = config.output.kind
    if config.order is not None:
        job["order"] = list(config.order)
    if config.shares is not None:
        job["shares"] = dict(config.shares)
    return json.dumps(job, indent=2)
