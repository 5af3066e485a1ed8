"""Exact and heuristic optimization of treatment-plan value.

Four entry points, all pure functions of an :class:`~timemachine.core.Instance`:

* :func:`enumerate_solve` -- exhaustive scan of all K^N plans; the reference
  oracle for everything else.
* :func:`mdp_value_table` -- finite-horizon dynamic program for the relaxed
  single-individual problem, where a different matrix may be chosen per state
  per step.  ``U[r][i]`` bounds from above what any single plan can deliver
  from state ``i`` with ``r`` steps left, which makes it an admissible
  pruning bound.
* :func:`branch_and_bound_solve` -- depth-first search in ascending matrix
  order, pruning subtrees whose relaxation bound cannot strictly beat the
  incumbent.  Guaranteed to match enumerate_solve's value.
* :func:`beam_search` -- width-limited heuristic scored by the same bound;
  its value never exceeds the true optimum.

:func:`decide_threshold` answers the decision variant (is there a plan with
value >= alpha?) with early exit on the first witness found.

Exact-mode searches run on an integer rescaling of the instance (see
:class:`_IntegerView`) so the hot loops do big-int arithmetic instead of
Fraction arithmetic; results are identical, just reduced at the end.
All searches are deterministic: identical inputs give identical results,
node counts included.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import Dict, List, Optional, Sequence, Tuple

from .core import EXACT, EVAL_TOL, Instance, Plan, Scalar

DEFAULT_ENUMERATION_BUDGET = 10**8


class BudgetExceededError(RuntimeError):
    """A solver's enumeration budget is too small for the request.

    ``required`` carries the number of visits the request would need
    (K^N for plan enumeration, 2^n for assignment scans).
    """

    def __init__(self, message: str, required: int):
        super().__init__(message)
        self.required = required


@dataclass(frozen=True)
class ValueTable:
    """Per-state value table of the relaxed problem.

    ``values[r][i]`` is the best probability of occupying the target after
    exactly ``r`` more steps starting from state ``i``, when the matrix
    choice may differ per state and per step.
    """

    values: Tuple[Tuple[Scalar, ...], ...]

    def bound(self, weights: Sequence[Scalar], steps_left: int) -> Scalar:
        """Upper bound on any plan's value from population ``weights`` with
        ``steps_left`` applications remaining."""
        level = self.values[steps_left]
        return sum(w * level[i] for i, w in enumerate(weights) if w)


@dataclass(frozen=True)
class SolveResult:
    value: Scalar
    plan: Plan
    nodes_explored: int
    nodes_pruned: int
    method: str


def _sparse_rows(inst: Instance):
    """Per matrix, per row: the nonzero (column, weight) pairs."""
    return [
        [tuple((j, t) for j, t in enumerate(row) if t) for row in m.rows]
        for m in inst.matrices
    ]


def _apply_sparse(weights, rows, zero):
    out = [zero] * len(weights)
    for i, w in enumerate(weights):
        if w:
            for j, t in rows[i]:
                out[j] = out[j] + w * t
    return tuple(out)


def _mode_units(inst: Instance):
    if inst.numeric_mode == EXACT:
        return Fraction(0), Fraction(1)
    return 0.0, 1.0


def _tables(inst: Instance, sparse):
    """Value table levels U[0..N] plus the one-step lookahead tables
    Q[r][k][i] = sum_j T_k[i][j] * U[r-1][j], so that the bound of a child
    node can be read off before materializing it."""
    d, K, N = inst.d, inst.K, inst.N
    zero, one = _mode_units(inst)
    u0 = tuple(one if i == inst.target else zero for i in range(d))
    levels = [u0]
    lookahead = [None]
    for _ in range(N):
        prev = levels[-1]
        q_level = []
        for k in range(K):
            rows = sparse[k]
            q_level.append(
                tuple(sum(t * prev[j] for j, t in rows[i]) if rows[i] else zero for i in range(d))
            )
        lookahead.append(q_level)
        levels.append(tuple(max(q_level[k][i] for k in range(K)) for i in range(d)))
    return levels, lookahead


def mdp_value_table(inst: Instance) -> ValueTable:
    """Solve the relaxed per-individual problem by backward induction.

    Runs in O(N * K * d^2).  ``values[0]`` is the indicator of the target;
    each later level takes the best matrix per state against the previous
    level.
    """
    levels, _ = _tables(inst, _sparse_rows(inst))
    return ValueTable(tuple(levels))


class _IntegerView:
    """Integer rescaling of an exact instance for the search hot loops.

    With L the lcm of every matrix-entry (and start-weight) denominator and
    D = L^(N+1), every weight reachable within N steps is an exact integer
    once scaled by D: each application divides divisibility headroom by at
    most L, and there are only N applications.  Lookahead values scale by
    L^r at level r, so bound comparisons are integral too.  Certainty masks
    mark states whose scaled lookahead equals the full mass headroom, i.e.
    whose relaxed value is exactly 1.
    """

    def __init__(self, inst: Instance, sparse, levels, lookahead):
        d, K, N = inst.d, inst.K, inst.N
        denominators = {Fraction(w).denominator for w in inst.start.weights}
        for matrix in inst.matrices:
            for row in matrix.rows:
                for x in row:
                    denominators.add(Fraction(x).denominator)
        self.base = lcm(*denominators)
        self.mass = self.base ** (N + 1)
        self.start = tuple(self._scaled(w, self.mass) for w in inst.start.weights)
        self.rows = [
            [
                tuple((j, Fraction(t).numerator, Fraction(t).denominator) for j, t in row)
                for row in matrix_rows
            ]
            for matrix_rows in sparse
        ]
        self.level_scale = [self.base**r for r in range(N + 1)]
        self.lookahead = [None]
        self.certain = [None]
        self.live = [sum(1 << i for i in range(d) if levels[0][i])]
        for r in range(1, N + 1):
            scale = self.level_scale[r]
            q_level = []
            masks = []
            for k in range(K):
                qk = lookahead[r][k]
                q_level.append(tuple(self._scaled(q, scale) for q in qk))
                masks.append(sum(1 << i for i in range(d) if qk[i] == 1))
            self.lookahead.append(q_level)
            self.certain.append(masks)
            self.live.append(sum(1 << i for i in range(d) if levels[r][i]))

    @staticmethod
    def _scaled(value, scale: int) -> int:
        scaled = Fraction(value) * scale
        if scaled.denominator != 1:
            raise AssertionError(f"scaling by {scale} did not clear denominator of {value}")
        return scaled.numerator

    def apply(self, weights, k: int):
        out = [0] * len(weights)
        for i, w in enumerate(weights):
            if w:
                for j, num, den in self.rows[k][i]:
                    out[j] += w * num // den
        return tuple(out)

    def to_fraction(self, scaled: int) -> Fraction:
        return Fraction(scaled, self.mass)


def enumerate_solve(inst: Instance, budget: int = DEFAULT_ENUMERATION_BUDGET) -> SolveResult:
    """Try all K^N plans and return the best value with the lexicographically
    smallest plan attaining it.

    Refuses to start if K^N exceeds ``budget`` (default 10^8).
    """
    K, N = inst.K, inst.N
    total = K**N
    if total > budget:
        raise BudgetExceededError(
            f"enumeration would visit K^N = {total} plans, budget is {budget}", total
        )
    sparse = _sparse_rows(inst)
    target = inst.target
    exact = inst.numeric_mode == EXACT
    view = None
    if exact:
        levels, lookahead = _tables(inst, sparse)
        view = _IntegerView(inst, sparse, levels, lookahead)
        start = view.start
    else:
        start = inst.start.weights

    best_value = None
    best_plan: Plan = ()
    explored = 0

    def walk(weights, depth: int, prefix: Plan):
        nonlocal best_value, best_plan, explored
        if depth == N:
            value = weights[target]
            if best_value is None or value > best_value:
                best_value, best_plan = value, prefix
            return
        for k in range(K):
            explored += 1
            child = view.apply(weights, k) if exact else _apply_sparse(weights, sparse[k], 0.0)
            walk(child, depth + 1, prefix + (k,))

    walk(start, 0, ())
    value = view.to_fraction(best_value) if exact else best_value
    return SolveResult(value, best_plan, explored, 0, "enum")


def branch_and_bound_solve(inst: Instance) -> SolveResult:
    """Exact solve by depth-first search with relaxation-bound pruning.

    Children are visited in ascending matrix-index order.  A subtree rooted
    at population ``v`` with ``r`` steps left is pruned when
    ``sum_i v[i] * U[r][i] <= incumbent`` -- only strict improvements are
    chased, so the returned plan is the first one attaining the final best
    value in this order (which may differ from enumerate_solve's tie-break;
    the values always agree).  Subtree value certificates are memoized per
    rescaled population so that revisited states prune immediately.

    ``nodes_explored`` counts one per child state materialized (one apply
    each); ``nodes_pruned`` counts skipped subtrees.
    """
    if inst.numeric_mode == EXACT:
        return _branch_and_bound_exact(inst)
    return _branch_and_bound_float(inst)


def _branch_and_bound_float(inst: Instance) -> SolveResult:
    K, N = inst.K, inst.N
    sparse = _sparse_rows(inst)
    target = inst.target
    levels, lookahead = _tables(inst, sparse)

    best_value = None
    best_plan: Plan = ()
    explored = 0
    pruned = 0
    certificates: Dict[tuple, float] = {}

    def walk(weights, depth: int, prefix: Plan) -> float:
        """Explore a subtree; return a certified upper bound on its best value."""
        nonlocal best_value, best_plan, explored, pruned
        if depth == N:
            value = weights[target]
            if best_value is None or value > best_value:
                best_value, best_plan = value, prefix
            return value
        steps_left = N - depth
        live_level = levels[steps_left]
        live = [(i, w) for i, w in enumerate(weights) if w and live_level[i]]
        key = mass = None
        if live:
            mass = sum(w for _, w in live)
            key = (steps_left, tuple((i, w / mass) for i, w in live))
            cached = certificates.get(key)
            if cached is not None:
                ceiling = cached * mass
                if best_value is not None and ceiling <= best_value:
                    pruned += 1
                    return ceiling
        q_level = lookahead[steps_left]
        nonzero = [(i, w) for i, w in enumerate(weights) if w]
        subtree_cap = 0.0
        for k in range(K):
            qk = q_level[k]
            bound = sum(w * qk[i] for i, w in nonzero)
            if best_value is not None and bound <= best_value:
                pruned += 1
                cap = bound
            else:
                explored += 1
                cap = walk(_apply_sparse(weights, sparse[k], 0.0), depth + 1, prefix + (k,))
            if cap > subtree_cap:
                subtree_cap = cap
        if key is not None:
            per_unit = subtree_cap / mass
            cached = certificates.get(key)
            if cached is None or per_unit < cached:
                certificates[key] = per_unit
        return subtree_cap

    walk(inst.start.weights, 0, ())
    return SolveResult(best_value, best_plan, explored, pruned, "bnb")


def _branch_and_bound_exact(inst: Instance) -> SolveResult:
    K, N = inst.K, inst.N
    target = inst.target
    sparse = _sparse_rows(inst)
    levels, lookahead = _tables(inst, sparse)
    view = _IntegerView(inst, sparse, levels, lookahead)
    full_mass = view.mass

    best_value: Optional[int] = None  # at D scale
    best_plan: Plan = ()
    incumbent_by_level: List[Optional[int]] = [None] * (N + 1)  # at D * L^r scale
    explored = 0
    pruned = 0
    certificates: Dict[tuple, Fraction] = {}

    def record(value: int, prefix: Plan) -> None:
        nonlocal best_value, best_plan, incumbent_by_level
        best_value, best_plan = value, prefix
        incumbent_by_level = [value * view.level_scale[r] for r in range(N + 1)]

    def walk(weights, depth: int, prefix: Plan):
        """Explore a subtree; return a certified upper bound on its best value.

        Bounds, weights, and the returned cap are integers at D scale
        (caps from memo hits may be Fractions; comparisons stay exact).
        """
        nonlocal explored, pruned
        if depth == N:
            value = weights[target]
            if best_value is None or value > best_value:
                record(value, prefix)
            return value
        steps_left = N - depth
        live_mask = view.live[steps_left]
        live = [(i, w) for i, w in enumerate(weights) if w and (live_mask >> i) & 1]
        key = scale = None
        if live:
            scale = gcd(*(w for _, w in live))
            key = (steps_left, tuple((i, w // scale) for i, w in live))
            cached = certificates.get(key)
            if cached is not None:
                ceiling = cached * scale
                if best_value is not None and ceiling <= best_value:
                    pruned += 1
                    return ceiling
        q_level = view.lookahead[steps_left]
        masks = view.certain[steps_left]
        incumbent = incumbent_by_level[steps_left]  # best_value * L^r, or None
        nonzero = [(i, w) for i, w in enumerate(weights) if w]
        support = 0
        for i, _ in nonzero:
            support |= 1 << i
        subtree_cap = 0
        for k in range(K):
            if not support & ~masks[k]:
                # every occupied state has relaxed value exactly 1
                bound = full_mass * view.level_scale[steps_left]
            else:
                qk = q_level[k]
                bound = sum(w * qk[i] for i, w in nonzero)
            if incumbent is not None and bound <= incumbent:
                pruned += 1
                cap = Fraction(bound, view.level_scale[steps_left])
            else:
                explored += 1
                cap = walk(view.apply(weights, k), depth + 1, prefix + (k,))
                incumbent = incumbent_by_level[steps_left]
            if cap > subtree_cap:
                subtree_cap = cap
        if key is not None:
            per_unit = Fraction(subtree_cap) / scale
            cached = certificates.get(key)
            if cached is None or per_unit < cached:
                certificates[key] = per_unit
        return subtree_cap

    walk(view.start, 0, ())
    return SolveResult(view.to_fraction(best_value), best_plan, explored, pruned, "bnb")


def beam_search(inst: Instance, width: int) -> SolveResult:
    """Keep the ``width`` most promising plan prefixes per level, scored by
    the relaxation bound; ties go to the lexicographically smaller prefix.

    Returns the best full plan kept.  Its value never exceeds the true
    optimum, and a width of at least K^N makes the search exhaustive.
    ``nodes_pruned`` counts prefixes dropped at beam truncation.
    """
    if width < 1:
        raise ValueError(f"beam width must be >= 1, got {width}")
    K, N = inst.K, inst.N
    sparse = _sparse_rows(inst)
    target = inst.target
    exact = inst.numeric_mode == EXACT
    levels, lookahead = _tables(inst, sparse)
    view = None
    if exact:
        view = _IntegerView(inst, sparse, levels, lookahead)
        beam = [(view.start, ())]
    else:
        beam = [(inst.start.weights, ())]

    explored = 0
    dropped = 0
    for t in range(N):
        steps_left = N - t - 1
        level = None if exact else levels[steps_left]
        candidates = []
        for weights, prefix in beam:
            for k in range(K):
                explored += 1
                if exact:
                    child = view.apply(weights, k)
                    if steps_left == 0:
                        score = child[target]
                    else:
                        # same ordering as the true bound: all scores at this
                        # level share the D * L^r scale
                        qk = view.lookahead[steps_left + 1][k]
                        score = sum(w * qk[i] for i, w in enumerate(weights) if w)
                else:
                    child = _apply_sparse(weights, sparse[k], 0.0)
                    score = sum(w * level[i] for i, w in enumerate(child) if w)
                candidates.append((score, prefix + (k,), child))
        candidates.sort(key=lambda c: c[1])
        candidates.sort(key=lambda c: c[0], reverse=True)
        if len(candidates) > width:
            dropped += len(candidates) - width
            candidates = candidates[:width]
        beam = [(child, prefix) for _, prefix, child in candidates]

    best_value = None
    best_plan: Plan = ()
    for weights, prefix in beam:
        value = weights[target]
        if best_value is None or value > best_value or (value == best_value and prefix < best_plan):
            best_value, best_plan = value, prefix
    if exact:
        best_value = view.to_fraction(best_value)
    return SolveResult(best_value, best_plan, explored, dropped, "beam")


def decide_threshold(inst: Instance, alpha: Scalar) -> Tuple[bool, Optional[Plan]]:
    """Is there a length-N plan with value >= alpha?  Returns (yes/no, witness).

    Depth-first in ascending matrix order with early exit on the first
    witness; a child is pruned when its relaxation bound falls below alpha
    (below ``alpha - 1e-12`` in float mode, where a leaf also qualifies at
    ``value >= alpha - 1e-12``).  Exact mode compares exactly -- alpha = 1
    is the case the 3-SAT reduction rides on, and there any state that has
    leaked mass toward a dead end is cut by a mask check before it is even
    materialized.  Failed states are memoized so the search never re-proves
    the same dead subtree.
    """
    exact = inst.numeric_mode == EXACT
    if exact:
        if isinstance(alpha, float):
            raise ValueError("exact instance requires an exact (int/Fraction) alpha")
    else:
        alpha = float(alpha)
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")

    K, N = inst.K, inst.N
    sparse = _sparse_rows(inst)
    target = inst.target
    levels, lookahead = _tables(inst, sparse)

    if exact and alpha == 1:
        return _decide_certainty(inst, sparse, levels, lookahead)

    if exact:
        view = _IntegerView(inst, sparse, levels, lookahead)
        start = view.start
        cutoffs = [alpha * view.mass * scale for scale in view.level_scale]
        leaf_cutoff = alpha * view.mass  # Fraction * int: exact comparison
        q_tables = view.lookahead
    else:
        view = None
        start = inst.start.weights
        cutoffs = [alpha - EVAL_TOL] * (N + 1)
        leaf_cutoff = alpha - EVAL_TOL
        q_tables = lookahead

    def walk(weights, depth: int, prefix: Plan) -> Optional[Plan]:
        if depth == N:
            return prefix if weights[target] >= leaf_cutoff else None
        steps_left = N - depth
        q_level = q_tables[steps_left]
        cutoff = cutoffs[steps_left]
        nonzero = [(i, w) for i, w in enumerate(weights) if w]
        for k in range(K):
            qk = q_level[k]
            bound = sum(w * qk[i] for i, w in nonzero)
            if bound < cutoff:
                continue
            child = view.apply(weights, k) if view else _apply_sparse(weights, sparse[k], 0.0)
            witness = walk(child, depth + 1, prefix + (k,))
            if witness is not None:
                return witness
        return None

    witness = walk(start, 0, ())
    return (witness is not None), witness


def _decide_certainty(inst: Instance, sparse, levels, lookahead):
    """decide_threshold specialized to exact mode with alpha = 1.

    With total mass 1 and per-state values capped at 1, a child's bound
    equals 1 exactly when every occupied state still has relaxation value 1,
    so the prune test collapses to a bitmask inclusion check and no child
    needs to be materialized just to be rejected.
    """
    K, N = inst.K, inst.N
    target = inst.target
    view = _IntegerView(inst, sparse, levels, lookahead)
    failed = set()

    def walk(weights, depth: int, prefix: Plan) -> Optional[Plan]:
        if depth == N:
            return prefix if weights[target] == view.mass else None
        key = (depth, weights)
        if key in failed:
            return None
        support = 0
        for i, w in enumerate(weights):
            if w:
                support |= 1 << i
        masks = view.certain[N - depth]
        for k in range(K):
            if support & ~masks[k]:
                continue  # some occupied state cannot fully return: bound < 1
            witness = walk(view.apply(weights, k), depth + 1, prefix + (k,))
            if witness is not None:
                return witness
        failed.add(key)
        return None

    witness = walk(view.start, 0, ())
    return (witness is not None), witness
