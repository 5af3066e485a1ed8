"""File formats: instance documents (JSON), plan files, and DIMACS CNF.

Instance files are versioned JSON documents.  Exact-mode numbers travel as
"num/den" strings in lowest terms so fixtures are bit-stable across
implementations; float-mode numbers are plain decimal literals (Python's
shortest round-trip repr).  Reading re-validates every instance invariant.

Plan files are a single line of whitespace-separated 0-based matrix
indices; lines starting with '#' are comments.

DIMACS CNF is read in the standard form (``c`` comments, a ``p cnf n m``
header, zero-terminated clauses possibly spanning lines).  Variables are
1-based in DIMACS and converted to 0-based (variable, polarity) pairs
right here at the parser boundary.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .core import (
    EXACT,
    FLOAT,
    Distribution,
    Instance,
    Plan,
    Scalar,
    StochasticMatrix,
    validate_instance,
)
from .reduction import RawLiteral, ReductionArtifact, formula_digest

FORMAT_VERSION = 1

PathOrFile = Union[str, "io.TextIOBase"]


class InstanceFormatError(ValueError):
    """An instance document is malformed, has the wrong version, or fails
    invariant validation on read."""


def format_scalar(x: Scalar, mode: str) -> str:
    """Canonical text for one number: "num/den" in exact mode, repr in float."""
    if mode == EXACT:
        frac = Fraction(x)
        return f"{frac.numerator}/{frac.denominator}"
    return repr(float(x))


def parse_exact_scalar(text) -> Fraction:
    if not isinstance(text, str):
        raise InstanceFormatError(f"exact number must be a \"num/den\" string, got {text!r}")
    num, sep, den = text.partition("/")
    try:
        numerator = int(num)
        denominator = int(den) if sep else 1
    except ValueError as exc:
        raise InstanceFormatError(f"bad rational {text!r}") from exc
    if denominator == 0:
        raise InstanceFormatError(f"zero denominator in {text!r}")
    return Fraction(numerator, denominator)


def _parse_float_scalar(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceFormatError(f"float number expected, got {value!r}")
    return float(value)


def _reject_constant(token):
    raise InstanceFormatError(f"non-finite number {token!r} in document")


@dataclass(frozen=True)
class ReductionMeta:
    """Reduction bookkeeping embedded in an instance document."""

    state_table: Dict[str, int]
    matrix_table: Dict[str, int]
    p: Fraction
    formula_digest: str


@dataclass(frozen=True)
class InstanceDocument:
    instance: Instance
    reduction_meta: Optional[ReductionMeta] = None


def _open(path_or_file: PathOrFile, mode: str):
    if isinstance(path_or_file, str):
        return open(path_or_file, mode, encoding="utf-8"), True
    return path_or_file, False


def write_instance(
    instance: Instance,
    path_or_file: PathOrFile,
    reduction_meta: Optional[ReductionMeta] = None,
) -> None:
    """Serialize an instance (losslessly: write-then-read round-trips)."""
    mode = instance.numeric_mode

    def scalar(x):
        return format_scalar(x, mode) if mode == EXACT else float(x)

    doc = {
        "format_version": FORMAT_VERSION,
        "numeric_mode": mode,
        "d": instance.d,
        "K": instance.K,
        "N": instance.N,
        "target": instance.target,
        "start": [scalar(w) for w in instance.start.weights],
        "matrices": [[[scalar(x) for x in row] for row in m.rows] for m in instance.matrices],
    }
    if any(m.label is not None for m in instance.matrices):
        doc["labels"] = [m.label for m in instance.matrices]
    if reduction_meta is not None:
        doc["reduction_meta"] = {
            "state_table": dict(reduction_meta.state_table),
            "matrix_table": dict(reduction_meta.matrix_table),
            "p": format_scalar(reduction_meta.p, EXACT),
            "formula_digest": reduction_meta.formula_digest,
        }
    fh, owned = _open(path_or_file, "w")
    try:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    finally:
        if owned:
            fh.close()


def write_artifact(artifact: ReductionArtifact, path_or_file: PathOrFile) -> None:
    """Serialize a reduction artifact: its instance plus the name tables."""
    digest = formula_digest(artifact.formula) if artifact.formula is not None else ""
    meta = ReductionMeta(
        state_table=dict(artifact.state_table),
        matrix_table=dict(artifact.matrix_table),
        p=artifact.p,
        formula_digest=digest,
    )
    write_instance(artifact.instance, path_or_file, reduction_meta=meta)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InstanceFormatError(message)


def read_instance(path_or_file: PathOrFile) -> InstanceDocument:
    """Parse and fully re-validate an instance document."""
    fh, owned = _open(path_or_file, "r")
    try:
        try:
            doc = json.load(fh, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"not valid JSON: {exc}") from exc
    finally:
        if owned:
            fh.close()

    _require(isinstance(doc, dict), "document must be a JSON object")
    version = doc.get("format_version")
    _require(
        version == FORMAT_VERSION,
        f"unsupported format_version {version!r} (expected {FORMAT_VERSION})",
    )
    mode = doc.get("numeric_mode")
    _require(mode in (EXACT, FLOAT), f"numeric_mode must be 'exact' or 'float', got {mode!r}")
    for field in ("d", "K", "N", "target", "start", "matrices"):
        _require(field in doc, f"missing field {field!r}")
    d, K, N, target = doc["d"], doc["K"], doc["N"], doc["target"]
    for name, value in (("d", d), ("K", K), ("N", N), ("target", target)):
        _require(isinstance(value, int) and not isinstance(value, bool), f"{name} must be an integer")

    parse = parse_exact_scalar if mode == EXACT else _parse_float_scalar
    start_raw = doc["start"]
    _require(isinstance(start_raw, list) and len(start_raw) == d, f"start must be a length-{d} array")
    start = Distribution(tuple(parse(x) for x in start_raw))

    matrices_raw = doc["matrices"]
    _require(isinstance(matrices_raw, list) and len(matrices_raw) == K, f"matrices must hold {K} entries")
    labels = doc.get("labels")
    if labels is not None:
        _require(isinstance(labels, list) and len(labels) == K, f"labels must be a length-{K} array")
    matrices = []
    for k, grid in enumerate(matrices_raw):
        _require(isinstance(grid, list) and len(grid) == d, f"matrix {k} must have {d} rows")
        rows = []
        for i, row in enumerate(grid):
            _require(isinstance(row, list) and len(row) == d, f"matrix {k} row {i} must have {d} entries")
            rows.append(tuple(parse(x) for x in row))
        label = labels[k] if labels is not None else None
        _require(label is None or isinstance(label, str), f"label {k} must be a string or null")
        matrices.append(StochasticMatrix(tuple(rows), label=label))

    instance = Instance(
        matrices=tuple(matrices), N=N, start=start, target=target, numeric_mode=mode
    )
    report = validate_instance(instance)
    if not report.ok:
        raise InstanceFormatError("invalid instance: " + "; ".join(report.violations))

    meta = None
    meta_raw = doc.get("reduction_meta")
    if meta_raw is not None:
        _require(isinstance(meta_raw, dict), "reduction_meta must be an object")
        for field in ("state_table", "matrix_table", "p", "formula_digest"):
            _require(field in meta_raw, f"reduction_meta missing {field!r}")
        state_table = meta_raw["state_table"]
        matrix_table = meta_raw["matrix_table"]
        _require(
            isinstance(state_table, dict) and all(isinstance(v, int) for v in state_table.values()),
            "state_table must map names to indices",
        )
        _require(
            isinstance(matrix_table, dict) and all(isinstance(v, int) for v in matrix_table.values()),
            "matrix_table must map names to indices",
        )
        meta = ReductionMeta(
            state_table=dict(state_table),
            matrix_table=dict(matrix_table),
            p=parse_exact_scalar(meta_raw["p"]),
            formula_digest=str(meta_raw["formula_digest"]),
        )
    return InstanceDocument(instance=instance, reduction_meta=meta)


def artifact_from_document(doc: InstanceDocument) -> ReductionArtifact:
    """Rebuild a (formula-less) reduction artifact from a loaded document."""
    if doc.reduction_meta is None:
        raise InstanceFormatError("instance document carries no reduction_meta")
    meta = doc.reduction_meta
    return ReductionArtifact(
        instance=doc.instance,
        state_table=dict(meta.state_table),
        matrix_table=dict(meta.matrix_table),
        p=meta.p,
        formula=None,
    )


def write_plan(plan: Sequence[int], path_or_file: PathOrFile, comment: Optional[str] = None) -> None:
    fh, owned = _open(path_or_file, "w")
    try:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(" ".join(str(k) for k in plan))
        fh.write("\n")
    finally:
        if owned:
            fh.close()


def read_plan(path_or_file: PathOrFile) -> Plan:
    """Read a plan file: at most one data line of matrix indices."""
    fh, owned = _open(path_or_file, "r")
    try:
        data_lines = [
            line.strip()
            for line in fh
            if line.strip() and not line.lstrip().startswith("#")
        ]
    finally:
        if owned:
            fh.close()
    if len(data_lines) > 1:
        raise ValueError(f"plan file has {len(data_lines)} data lines, expected one")
    if not data_lines:
        return ()
    try:
        return tuple(int(tok) for tok in data_lines[0].split())
    except ValueError as exc:
        raise ValueError(f"plan file holds a non-integer token: {exc}") from exc


def parse_dimacs(text: str) -> Tuple[int, List[List[RawLiteral]]]:
    """Parse DIMACS CNF text into (num_vars, clauses) with clauses given as
    lists of 0-based (variable, polarity) pairs.

    Tolerates clauses spanning lines and clauses sharing a line; checks the
    header, variable ranges, the terminating 0 of the last clause, and that
    the clause count matches the header.
    """
    num_vars: Optional[int] = None
    num_clauses: Optional[int] = None
    clauses: List[List[RawLiteral]] = []
    current: List[RawLiteral] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("c"):
            continue
        if stripped.startswith("p"):
            if num_vars is not None:
                raise ValueError(f"line {lineno}: duplicate header")
            fields = stripped.split()
            if len(fields) != 4 or fields[1] != "cnf":
                raise ValueError(f"line {lineno}: malformed header {stripped!r}")
            try:
                num_vars, num_clauses = int(fields[2]), int(fields[3])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: malformed header {stripped!r}") from exc
            if num_vars < 0 or num_clauses < 0:
                raise ValueError(f"line {lineno}: negative counts in header")
            continue
        if num_vars is None:
            raise ValueError(f"line {lineno}: clause data before 'p cnf' header")
        for token in stripped.split():
            try:
                literal = int(token)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: non-integer token {token!r}") from exc
            if literal == 0:
                clauses.append(current)
                current = []
                continue
            var = abs(literal) - 1
            if var >= num_vars:
                raise ValueError(
                    f"line {lineno}: variable {abs(literal)} out of range (header says {num_vars})"
                )
            current.append((var, 1 if literal > 0 else -1))
    if num_vars is None:
        raise ValueError("missing 'p cnf' header")
    if current:
        raise ValueError("last clause is missing its terminating 0")
    if len(clauses) != num_clauses:
        raise ValueError(f"header promises {num_clauses} clauses, file holds {len(clauses)}")
    return num_vars, clauses
