"""Population states, transition matrices, and treatment-plan evaluation.

A population over ``d`` genotypes is a row vector on the probability
simplex.  Applying an antibiotic multiplies that row vector on the right
by a row-stochastic ``d x d`` matrix.  A treatment plan is a sequence of
matrix indices; its value is the fraction of the population sitting on
the target (wild-type) state after the last step.

Everything runs in one of two numeric modes, tagged per instance:

* ``exact``: arbitrary-precision rationals (`fractions.Fraction`, plain
  ``int`` also accepted).  Used for reduction instances and threshold
  decisions at alpha = 1, where rounding would be fatal.
* ``float``: IEEE doubles, with input row sums accepted within
  ``ROW_SUM_TOL`` and internal comparisons at ``EVAL_TOL``.

Mixing modes inside one instance is a validation error.  All types here
are immutable and all operations are pure functions, so instances can be
shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import isfinite
from typing import List, Optional, Sequence, Tuple, Union

Scalar = Union[int, Fraction, float]
Plan = Tuple[int, ...]

EXACT = "exact"
FLOAT = "float"

# Accepted drift on row/mass sums of float input data.
ROW_SUM_TOL = 1e-9
# Internal float comparisons (plan values, bounds).
EVAL_TOL = 1e-12


def _scalar_mode_error(x: Scalar, mode: str) -> Optional[str]:
    """Return a description of why ``x`` is not a valid scalar for ``mode``."""
    if isinstance(x, bool):
        return "booleans are not numeric values"
    if mode == EXACT:
        if not isinstance(x, (int, Fraction)):
            return f"{x!r} is not an exact rational"
    else:
        if not isinstance(x, float):
            return f"{x!r} is not a float"
        if not isfinite(x):
            return f"{x!r} is not finite"
    return None


@dataclass(frozen=True)
class Distribution:
    """A population state: one weight per genotype, nonnegative, total mass 1."""

    weights: Tuple[Scalar, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(self.weights))

    def __len__(self) -> int:
        return len(self.weights)

    @classmethod
    def unit(cls, d: int, index: int, mode: str = EXACT) -> "Distribution":
        """Point mass on ``index`` in a ``d``-state system."""
        if not 0 <= index < d:
            raise ValueError(f"index {index} out of range for d={d}")
        if mode == EXACT:
            one, zero = Fraction(1), Fraction(0)
        else:
            one, zero = 1.0, 0.0
        return cls(tuple(one if i == index else zero for i in range(d)))


@dataclass(frozen=True)
class StochasticMatrix:
    """A row-stochastic matrix: entry ``rows[i][j]`` is the probability that
    genotype ``i`` mutates to genotype ``j`` under one application."""

    rows: Tuple[Tuple[Scalar, ...], ...]
    label: Optional[str] = None

    def __post_init__(self):
        # keep already-tuple rows as-is so encoders can share row objects
        object.__setattr__(
            self, "rows", tuple(r if isinstance(r, tuple) else tuple(r) for r in self.rows)
        )

    @property
    def dim(self) -> int:
        return len(self.rows)

    @classmethod
    def identity(cls, d: int, mode: str = EXACT, label: Optional[str] = None) -> "StochasticMatrix":
        if mode == EXACT:
            one, zero = Fraction(1), Fraction(0)
        else:
            one, zero = 1.0, 0.0
        rows = tuple(tuple(one if i == j else zero for j in range(d)) for i in range(d))
        return cls(rows, label=label)


@dataclass(frozen=True)
class Instance:
    """A solvable problem: K matrices, a horizon N, a start state and a target.

    ``start`` defaults to unit mass on state 0 (the wild type), which is also
    the default target.  Construction only does structural coercion; use
    :func:`validate_instance` for the full invariant check, which reports
    violations instead of raising so that bad data can be diagnosed.
    """

    matrices: Tuple[StochasticMatrix, ...]
    N: int
    start: Optional[Distribution] = None
    target: int = 0
    numeric_mode: str = FLOAT

    def __post_init__(self):
        object.__setattr__(self, "matrices", tuple(self.matrices))
        if self.start is None:
            if not self.matrices:
                raise ValueError("cannot infer dimension: no matrices and no start")
            d = self.matrices[0].dim
            object.__setattr__(self, "start", Distribution.unit(d, 0, self.numeric_mode))

    @property
    def d(self) -> int:
        return len(self.start.weights)

    @property
    def K(self) -> int:
        return len(self.matrices)


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def _check_mass(weights: Sequence[Scalar], mode: str, what: str, out: List[str]) -> None:
    total = sum(weights)
    if mode == EXACT:
        if total != 1:
            out.append(f"{what}: mass {total} != 1")
    elif abs(total - 1) > ROW_SUM_TOL:
        out.append(f"{what}: mass {total!r} not within {ROW_SUM_TOL} of 1")


def validate_instance(inst: Instance) -> ValidationReport:
    """Check every instance invariant and name each violation found.

    Covers: mode tag sanity, K >= 1, N >= 0, target range, start simplex
    membership, matrix shapes, entry ranges, per-row mass, and numeric-mode
    uniformity (no floats in an exact instance and vice versa).
    """
    out: List[str] = []
    mode = inst.numeric_mode
    if mode not in (EXACT, FLOAT):
        return ValidationReport((f"numeric_mode must be '{EXACT}' or '{FLOAT}', got {mode!r}",))
    if inst.K < 1:
        out.append("instance must contain at least one matrix")
    if inst.N < 0:
        out.append(f"horizon N must be >= 0, got {inst.N}")
    d = inst.d
    if d < 1:
        out.append("state count d must be >= 1")
    if not 0 <= inst.target < d:
        out.append(f"target index {inst.target} out of range for d={d}")

    bad_start = False
    for i, w in enumerate(inst.start.weights):
        err = _scalar_mode_error(w, mode)
        if err is not None:
            out.append(f"start entry {i}: {err}")
            bad_start = True
        elif w < 0:
            out.append(f"start entry {i}: {w!r} is negative")
            bad_start = True
    if not bad_start:
        _check_mass(inst.start.weights, mode, "start", out)

    for k, matrix in enumerate(inst.matrices):
        name = f"matrix {k}" if matrix.label is None else f"matrix {k} ({matrix.label!r})"
        if matrix.dim != d:
            out.append(f"{name}: has {matrix.dim} rows, expected {d}")
            continue
        for i, row in enumerate(matrix.rows):
            if len(row) != d:
                out.append(f"{name} row {i}: has {len(row)} entries, expected {d}")
                continue
            bad_row = False
            for j, x in enumerate(row):
                err = _scalar_mode_error(x, mode)
                if err is not None:
                    out.append(f"{name} row {i} entry {j}: {err}")
                    bad_row = True
                elif not 0 <= x <= 1:
                    out.append(f"{name} row {i} entry {j}: {x!r} outside [0, 1]")
                    bad_row = True
            if not bad_row:
                _check_mass(row, mode, f"{name} row {i}", out)
    return ValidationReport(tuple(out))


def apply(v: Distribution, matrix: StochasticMatrix) -> Distribution:
    """One treatment step: the row-vector product ``v @ matrix``."""
    weights = v.weights
    d = len(weights)
    rows = matrix.rows
    if len(rows) != d or any(len(row) != d for row in rows):
        raise ValueError(
            f"dimension mismatch: distribution has {d} entries, "
            f"matrix is {len(rows)}x{len(rows[0]) if rows else 0}"
        )
    out = [weights[0] * 0] * d  # zero of the operand type
    for i, w in enumerate(weights):
        if w:
            row = rows[i]
            for j in range(d):
                t = row[j]
                if t:
                    out[j] = out[j] + w * t
    return Distribution(tuple(out))


def _check_plan_indices(inst: Instance, plan: Sequence[int]) -> Plan:
    plan = tuple(plan)
    for step, k in enumerate(plan):
        if not 0 <= k < inst.K:
            raise ValueError(f"plan step {step}: matrix index {k} out of range for K={inst.K}")
    return plan


def evaluate_plan(inst: Instance, plan: Sequence[int]) -> Scalar:
    """Value of a full-length plan: the target coordinate after applying
    the plan's matrices to the start state in order.

    The empty plan (N = 0) is legal and evaluates to ``start[target]``.
    """
    plan = _check_plan_indices(inst, plan)
    if len(plan) != inst.N:
        raise ValueError(f"plan has {len(plan)} steps, instance horizon is {inst.N}")
    v = inst.start
    for k in plan:
        v = apply(v, inst.matrices[k])
    return v.weights[inst.target]


def trajectory(inst: Instance, plan: Sequence[int]) -> List[Distribution]:
    """The step-by-step population states visited by a plan (or plan prefix).

    Element 0 is the start state; element ``t + 1`` follows by applying the
    matrix chosen at step ``t``.  For a full-length plan the last element's
    target coordinate equals :func:`evaluate_plan`.
    """
    plan = _check_plan_indices(inst, plan)
    if len(plan) > inst.N:
        raise ValueError(f"plan has {len(plan)} steps, longer than horizon {inst.N}")
    points = [inst.start]
    for k in plan:
        points.append(apply(points[-1], inst.matrices[k]))
    return points
