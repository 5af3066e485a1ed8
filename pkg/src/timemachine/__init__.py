"""Treatment-plan optimization over row-stochastic mutation matrices, and
the 3-SAT reduction that makes the general problem NP-hard to solve."""

from .core import (
    EXACT,
    EVAL_TOL,
    FLOAT,
    ROW_SUM_TOL,
    Distribution,
    Instance,
    Plan,
    Scalar,
    StochasticMatrix,
    ValidationReport,
    apply,
    evaluate_plan,
    trajectory,
    validate_instance,
)
from .solvers import (
    BudgetExceededError,
    SolveResult,
    ValueTable,
    beam_search,
    branch_and_bound_solve,
    decide_threshold,
    enumerate_solve,
    mdp_value_table,
)
from .reduction import (
    Assignment,
    Clause,
    CnfFormula,
    NormalizeResult,
    ReductionArtifact,
    RoundtripReport,
    VerificationError,
    clause_satisfied,
    decode_assignment,
    encode_reduction,
    formula_digest,
    is_canonical_plan,
    normalize_cnf,
    sat_bruteforce,
    satisfying_plan,
    verify_roundtrip,
)
from .instance_io import (
    InstanceDocument,
    InstanceFormatError,
    ReductionMeta,
    artifact_from_document,
    parse_dimacs,
    read_instance,
    read_plan,
    write_artifact,
    write_instance,
    write_plan,
)

__version__ = "0.1.0"
