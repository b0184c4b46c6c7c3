from dataclasses import dataclass
import functools
import itertools
import logging
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

import bellforge.config as config
from .errors import *
from .messages import *
from .quantum import Behavior

"""
Critical visibility of a behavior under white noise, as a linear program over the
deterministic strategies of its Bell scenario.

Variables are one weight q per deterministic strategy plus the visibility v. For every
setting combination s and outcome combination r the local model must reproduce the noisy
behavior v p(r|s) + (1 - v) 2^-N:

    sum_l q_l D_l(r|s) - v (p(r|s) - 2^-N) = 2^-N
    sum_l q_l = 1,  q >= 0,  0 <= v <= 1

and v is maximized. Rows are kept even though one normalization per setting combination
is implied; the solver handles the rank deficiency.
"""

HIGHS_METHOD = 'highs-ds'


@dataclass(frozen=True)
class DeterministicStrategy:
    """
    Fixed outcome index (0 for +1, 1 for -1) for every setting of every party.
    """
    outcomes: Tuple[Tuple[int, ...], ...]

    def to_behavior(self) -> Behavior:
        """The 0/1 behavior D(r|s) induced by the strategy."""
        shape = tuple(len(party) for party in self.outcomes)
        probabilities = np.zeros(shape + (2,) * len(shape))

        for settings in itertools.product(*[range(m) for m in shape]):
            result = tuple(self.outcomes[party][s] for party, s in enumerate(settings))
            probabilities[settings + result] = 1.0

        return Behavior(probabilities)


@dataclass(eq=False)
class LPModel:
    """
    Visibility linear program in equality form. Column order is the strategies, in the
    order of enumerate_strategies(), followed by v. Row order is (s, r) lexicographic,
    followed by the normalization row.
    """
    settings_shape: Tuple[int, ...]
    n_strategies: int
    constraints: sp.csr_matrix
    rhs: np.ndarray
    # Rank of the constraint matrix: a vertex with this many positive variables is nondegenerate
    basis_size: int

    @property
    def n_variables(self) -> int:
        return self.n_strategies + 1

    @property
    def n_rows(self) -> int:
        return self.constraints.shape[0]

    def strategy_block(self) -> sp.csr_matrix:
        """Outcome rows against strategy columns, without normalization row and v column."""
        return self.constraints[:-1, :-1]


@dataclass(eq=False)
class LPSolution:
    objective: float
    x: np.ndarray
    duals: Optional[np.ndarray]
    iterations: int
    method: str
    dual_unique: Optional[bool] = None


@dataclass(eq=False)
class VisibilityResult:
    """
    v_crit, strength = 1 - v_crit and the dual certificate when the solver provides one.
    certificate holds one coefficient per (s, r) row; certificate_margin is its value on the
    behavior minus its maximum over deterministic strategies.
    """
    v_crit: float
    strength: float
    violated: bool
    certificate: Optional[np.ndarray] = None
    certificate_margin: Optional[float] = None
    dual_unique: Optional[bool] = None

    def __str__(self) -> str:
        return f"VisibilityResult: [v_crit={self.v_crit:.9f} strength={self.strength:.9f} violated={self.violated}]"


def strategy_count(settings_shape: Sequence[int]) -> int:
    return 2 ** int(sum(settings_shape))


def enumerate_strategies(settings_shape: Sequence[int]) -> Iterator[DeterministicStrategy]:
    """Yields every deterministic strategy in LP column order. Bit s of a party's assignment
    number is its outcome index for setting s; the first party varies slowest."""
    per_party = [[tuple((assignment >> s) & 1 for s in range(m)) for assignment in range(2 ** m)]
                 for m in settings_shape]

    for outcomes in itertools.product(*per_party):
        yield DeterministicStrategy(outcomes)


@functools.lru_cache(maxsize=32)
def _strategy_block(settings_shape: Tuple[int, ...]) -> sp.csr_matrix:
    """0/1 matrix with one row per (s, r) and one column per strategy. Every strategy has
    exactly one 1 per setting combination."""
    n_parties = len(settings_shape)
    n_settings = int(np.prod(settings_shape))
    n_strategies = strategy_count(settings_shape)

    # Outcome combination index, one axis per party assignment then one per party setting
    outcome_index = np.zeros([2 ** m for m in settings_shape] + list(settings_shape), dtype=np.int64)
    for party, m in enumerate(settings_shape):
        bits = (np.arange(2 ** m)[:, None] >> np.arange(m)) & 1
        view = [1] * (2 * n_parties)
        view[party] = 2 ** m
        view[n_parties + party] = m
        outcome_index = outcome_index + (bits.reshape(view) << (n_parties - 1 - party))

    outcome_index = outcome_index.reshape(n_strategies, n_settings)
    rows = np.arange(n_settings)[None, :] * 2 ** n_parties + outcome_index
    columns = np.repeat(np.arange(n_strategies), n_settings)

    return sp.csr_matrix((np.ones(rows.size), (rows.ravel(), columns)),
                         shape=(n_settings * 2 ** n_parties, n_strategies))


def build_visibility_lp(behavior: Behavior) -> LPModel:
    """Builds the visibility linear program of a behavior.

    Parameters
    ----------
    behavior: Behavior
        Behavior p(r|s) of the noise-free state

    Returns
    -------
    The LPModel. v = 0 with the uniform strategy mixture is always feasible.
    CapacityError is raised when the scenario has more than CONFIG_MAX_STRATEGIES strategies.
    """
    shape = tuple(behavior.settings_shape)
    n_strategies = strategy_count(shape)

    if (n_strategies > config.CONFIG_MAX_STRATEGIES):
        raise CapacityError(TEMPLATE_CAPACITY_EXCEEDED.substitute(
            shape='x'.join(map(str, shape)), strategies=n_strategies, cap=config.CONFIG_MAX_STRATEGIES))

    noise = 2.0 ** -behavior.n_parties
    probabilities = behavior.flat().reshape(-1)

    outcome_rows = sp.hstack([_strategy_block(shape),
                              sp.csr_matrix(-(probabilities - noise)[:, None])])
    normalization = sp.csr_matrix(np.append(np.ones(n_strategies), 0.0)[None, :])

    return LPModel(
        settings_shape=shape,
        n_strategies=n_strategies,
        constraints=sp.vstack([outcome_rows, normalization], format='csr'),
        rhs=np.append(np.full(probabilities.size, noise), 1.0),
        basis_size=int(np.prod([m + 1 for m in shape])))


def solve_lp(model: LPModel) -> LPSolution:
    """Maximizes v with the HiGHS dual simplex, which perturbs costs against cycling.

    Returns
    -------
    The optimal LPSolution with the equality-row duals (sensitivities of -v to the
    right-hand side). InfeasibleError, NonConvergenceError or SolverError is raised when no
    optimum is found.
    """
    tolerance = config.CONFIG_LP_TOLERANCE
    cost = np.zeros(model.n_variables)
    cost[-1] = -1.0

    bounds = np.zeros((model.n_variables, 2))
    bounds[:, 1] = np.inf
    bounds[-1, 1] = 1.0

    has_rows = model.n_rows > 0
    result = linprog(cost,
                     A_eq=model.constraints if has_rows else None,
                     b_eq=model.rhs if has_rows else None,
                     bounds=bounds,
                     method=HIGHS_METHOD,
                     options={'primal_feasibility_tolerance': tolerance,
                              'dual_feasibility_tolerance': tolerance,
                              'maxiter': config.CONFIG_LP_MAX_ITERATIONS})

    if (result.status == 1):
        raise NonConvergenceError(TEMPLATE_LP_NOT_CONVERGED.substitute(
            iterations=config.CONFIG_LP_MAX_ITERATIONS))
    if (result.status == 2):
        raise InfeasibleError(TEMPLATE_LP_INFEASIBLE.substitute(detail=result.message))
    if (result.status != 0):
        raise SolverError(TEMPLATE_LP_FAILED.substitute(status=result.status, detail=result.message))

    duals = None
    eqlin = getattr(result, 'eqlin', None)
    if (has_rows and eqlin is not None):
        duals = np.asarray(eqlin.marginals, dtype=float)
    elif (not has_rows):
        duals = np.zeros(0)

    positive = int(np.count_nonzero(result.x > tolerance))

    return LPSolution(objective=-result.fun,
                      x=result.x,
                      duals=duals,
                      iterations=int(getattr(result, 'nit', 0)),
                      method=HIGHS_METHOD,
                      dual_unique=positive >= model.basis_size)


def solve_lp_dense(model: LPModel) -> LPSolution:
    """Maximizes v with a dense two-phase tableau simplex using Bland's rule.

    Slow, and only meant as an independent oracle for small scenarios. v <= 1 becomes an
    equality with a slack column; phase one minimizes the sum of one artificial per row.
    """
    tolerance = config.CONFIG_LP_TOLERANCE
    n = model.n_variables
    equalities = model.constraints.toarray() if model.n_rows > 0 else np.zeros((0, n))

    matrix = np.hstack([equalities, np.zeros((equalities.shape[0], 1))])
    bound_row = np.zeros(n + 1)
    bound_row[n - 1] = bound_row[n] = 1.0
    matrix = np.vstack([matrix, bound_row])
    rhs = np.append(model.rhs, 1.0)

    negative = rhs < 0
    matrix[negative] *= -1
    rhs[negative] *= -1

    n_rows, n_columns = matrix.shape
    tableau = np.hstack([matrix, np.eye(n_rows), rhs[:, None]])
    basis = list(range(n_columns, n_columns + n_rows))

    phase_one_cost = np.append(np.zeros(n_columns), np.ones(n_rows))
    iterations = _bland_simplex(tableau, basis, phase_one_cost, tolerance)

    infeasibility = tableau[:, -1][np.array(basis) >= n_columns].sum()
    if (infeasibility > 1e-7):
        raise InfeasibleError(TEMPLATE_LP_INFEASIBLE.substitute(
            detail=f'phase one ended with artificial sum {infeasibility}'))

    # Drive artificials out of the basis; rows where that is impossible are redundant
    redundant = []
    for row, variable in enumerate(basis):
        if (variable < n_columns):
            continue
        candidates = np.nonzero(np.abs(tableau[row, :n_columns]) > tolerance)[0]
        if (len(candidates) == 0):
            redundant.append(row)
        else:
            _pivot(tableau, basis, row, candidates[0])

    keep = [row for row in range(n_rows) if row not in redundant]
    tableau = np.hstack([tableau[keep, :n_columns], tableau[keep, -1:]])
    basis = [basis[row] for row in keep]

    phase_two_cost = np.zeros(n_columns)
    phase_two_cost[n - 1] = -1.0
    iterations += _bland_simplex(tableau, basis, phase_two_cost, tolerance)

    x = np.zeros(n_columns)
    x[basis] = tableau[:, -1]

    return LPSolution(objective=x[n - 1], x=x[:n], duals=None, iterations=iterations, method='bland')


def _bland_simplex(tableau: np.ndarray, basis: List[int], cost: np.ndarray, tolerance: float) -> int:
    """Minimizes cost over the tableau in place. Entering variable is the lowest index with a
    negative reduced cost, leaving variable the lowest index among the minimum ratios."""
    n_columns = len(cost)

    for iteration in range(config.CONFIG_LP_MAX_ITERATIONS):
        reduced = cost - cost[basis] @ tableau[:, :n_columns]
        entering = np.nonzero(reduced < -tolerance)[0]
        if (len(entering) == 0):
            return iteration

        column = entering[0]
        pivot_column = tableau[:, column]
        eligible = np.nonzero(pivot_column > tolerance)[0]
        if (len(eligible) == 0):
            raise SolverError(TEMPLATE_LP_FAILED.substitute(status='unbounded', detail=f'column {column}'))

        ratios = tableau[eligible, -1] / pivot_column[eligible]
        ties = eligible[ratios <= ratios.min() + tolerance]
        leaving = min(ties, key=lambda row: basis[row])

        _pivot(tableau, basis, leaving, column)

    raise NonConvergenceError(TEMPLATE_LP_NOT_CONVERGED.substitute(
        iterations=config.CONFIG_LP_MAX_ITERATIONS))


def _pivot(tableau: np.ndarray, basis: List[int], row: int, column: int):
    tableau[row] /= tableau[row, column]
    for other in range(tableau.shape[0]):
        if (other != row and tableau[other, column] != 0.0):
            tableau[other] -= tableau[other, column] * tableau[row]
    basis[row] = column


def critical_visibility(behavior: Behavior, solver=solve_lp) -> VisibilityResult:
    """Solves the visibility linear program of a behavior.

    Parameters
    ----------
    behavior: Behavior
        Behavior of the noise-free state
    solver: callable
        solve_lp or solve_lp_dense

    Returns
    -------
    VisibilityResult with v_crit and strength clamped to [0, 1]. When the solver reports
    duals, the certificate is the functional whose value on the behavior exceeds its local
    maximum by at least the strength. Solver errors propagate.
    """
    model = build_visibility_lp(behavior)
    solution = solver(model)

    v_crit = min(1.0, max(0.0, solution.objective))
    strength = min(1.0, max(0.0, 1.0 - v_crit))
    result = VisibilityResult(v_crit=v_crit,
                              strength=strength,
                              violated=strength > config.CONFIG_VIOLATION_EPSILON,
                              dual_unique=solution.dual_unique)

    if (solution.duals is not None and len(solution.duals) == model.n_rows and model.n_rows > 0):
        certificate = solution.duals[:-1].copy()
        local_maximum = (model.strategy_block().T @ certificate).max()
        result.certificate = certificate
        result.certificate_margin = float(certificate @ behavior.flat().reshape(-1) - local_maximum)

    logging.debug(f"Critical visibility: [shape={model.settings_shape} {result} iterations={solution.iterations}]")

    return result


def restrict_behavior(behavior: Behavior, kept_settings: Sequence[Sequence[int]]) -> Behavior:
    """Sub-behavior over the kept zero-based setting indices of every party.

    ParameterError is raised for an empty list, a repeated index or an index out of range.
    """
    if (len(kept_settings) != behavior.n_parties):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='kept_settings', value=len(kept_settings),
            reason=f'expected one list per party ({behavior.n_parties})'))

    for party, (kept, m) in enumerate(zip(kept_settings, behavior.settings_shape)):
        if (len(kept) == 0 or len(set(kept)) != len(kept) or min(kept) < 0 or max(kept) >= m):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name=f'kept settings of party {party + 1}', value=list(kept),
                reason=f'must be distinct indices in [0, {m - 1}]'))

    index = np.ix_(*[list(kept) for kept in kept_settings], *([[0, 1]] * behavior.n_parties))
    return Behavior(behavior.probabilities[index])
