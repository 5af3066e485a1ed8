"""Shared test fixtures: seeded random generators and independent oracles.

The oracles here deliberately avoid the library's evaluation path: plan
values are recomputed via full matrix-matrix chain products, satisfaction
of raw literal clauses via a tiny truth-table evaluator, and matrix powers
by naive multiplication.
"""

from fractions import Fraction
from itertools import product
from random import Random

from timemachine import Clause, CnfFormula, Distribution, Instance, StochasticMatrix


# ---------------------------------------------------------------------------
# independent oracles


def matmul(a, b):
    n = len(a)
    return [
        [sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)]
        for i in range(n)
    ]


def matrix_power(rows, exponent):
    n = len(rows)
    result = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    for _ in range(exponent):
        result = matmul(result, [list(r) for r in rows])
    return result


def chain_value_oracle(inst, plan):
    """Plan value recomputed as start @ (T1 @ T2 @ ... @ TN) picked at target,
    via full matrix products rather than repeated vector application."""
    d = inst.d
    product_matrix = [[1 if i == j else 0 for j in range(d)] for i in range(d)]
    for k in plan:
        product_matrix = matmul(product_matrix, [list(r) for r in inst.matrices[k].rows])
    start = inst.start.weights
    return sum(start[i] * product_matrix[i][inst.target] for i in range(d))


def raw_clause_satisfied(raw_clause, assignment):
    """Standard literal semantics: (var, +1) is true when the variable is +."""
    return any(assignment[var] == polarity for var, polarity in raw_clause)


def raw_satisfiable(raw_clauses, num_vars):
    for assignment in product((-1, 1), repeat=num_vars):
        if all(raw_clause_satisfied(c, assignment) for c in raw_clauses):
            return True
    return False


def formula_satisfiable_bruteforce(formula: CnfFormula):
    """Truth-table satisfiability of a normalized formula, written against the
    falsifying-pattern convention directly (independent of clause_satisfied)."""
    for assignment in product((-1, 1), repeat=formula.num_vars):
        if all(
            tuple(assignment[v] for v in clause.variables) != clause.forbidden
            for clause in formula.clauses
        ):
            return True
    return False


# ---------------------------------------------------------------------------
# seeded random data


def random_float_matrix(rng: Random, d: int) -> StochasticMatrix:
    rows = []
    for _ in range(d):
        raw = [rng.random() + 1e-3 for _ in range(d)]
        total = sum(raw)
        rows.append(tuple(x / total for x in raw))
    return StochasticMatrix(tuple(rows))


def random_exact_matrix(rng: Random, d: int, max_weight: int = 6) -> StochasticMatrix:
    rows = []
    for _ in range(d):
        raw = [rng.randint(0, max_weight) for _ in range(d)]
        if sum(raw) == 0:
            raw[rng.randrange(d)] = 1
        total = sum(raw)
        rows.append(tuple(Fraction(x, total) for x in raw))
    return StochasticMatrix(tuple(rows))


def random_float_distribution(rng: Random, d: int) -> Distribution:
    raw = [rng.random() + 1e-3 for _ in range(d)]
    total = sum(raw)
    return Distribution(tuple(x / total for x in raw))


def random_exact_distribution(rng: Random, d: int, max_weight: int = 6) -> Distribution:
    raw = [rng.randint(0, max_weight) for _ in range(d)]
    if sum(raw) == 0:
        raw[0] = 1
    total = sum(raw)
    return Distribution(tuple(Fraction(x, total) for x in raw))


def random_instance(rng: Random, d: int, K: int, N: int, mode: str = "float") -> Instance:
    if mode == "float":
        matrices = tuple(random_float_matrix(rng, d) for _ in range(K))
        start = random_float_distribution(rng, d)
    else:
        matrices = tuple(random_exact_matrix(rng, d) for _ in range(K))
        start = random_exact_distribution(rng, d)
    return Instance(
        matrices=matrices,
        N=N,
        start=start,
        target=rng.randrange(d),
        numeric_mode=mode,
    )


# ---------------------------------------------------------------------------
# formulas


def single_clause_formula(forbidden=(-1, -1, -1)) -> CnfFormula:
    return CnfFormula(3, (Clause(tuple(zip((0, 1, 2), forbidden))),))


def all_patterns_formula() -> CnfFormula:
    """The minimal unsatisfiable formula in this clause model: all eight sign
    patterns over the same three variables are forbidden."""
    clauses = tuple(
        Clause(((0, a), (1, b), (2, c))) for a, b, c in product((-1, 1), repeat=3)
    )
    return CnfFormula(3, clauses)


def random_normal_formula(rng: Random, num_vars: int, num_clauses: int) -> CnfFormula:
    """A random already-normalized formula; variables not hit by any clause
    are compacted away, so the result may have fewer variables."""
    clauses = []
    for _ in range(num_clauses):
        variables = rng.sample(range(num_vars), 3)
        signs = [rng.choice((-1, 1)) for _ in range(3)]
        clauses.append(tuple(zip(variables, signs)))
    used = sorted({v for clause in clauses for v, _ in clause})
    remap = {old: new for new, old in enumerate(used)}
    return CnfFormula(
        len(used),
        tuple(Clause(tuple((remap[v], s) for v, s in clause)) for clause in clauses),
    )


def random_raw_clauses(rng: Random, num_vars: int, num_clauses: int):
    """Raw clause lists of mixed widths (literals as (var, polarity) pairs),
    possibly with repeated variables inside a clause."""
    width_choices = [1, 2, 2, 3, 3, 3, 3, 3, 4, 4]
    clauses = []
    for _ in range(num_clauses):
        width = rng.choice(width_choices)
        clause = [
            (rng.randrange(num_vars), rng.choice((-1, 1))) for _ in range(width)
        ]
        clauses.append(clause)
    return clauses
