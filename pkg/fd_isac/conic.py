"""conic.py - linear/SDP/rotated-cone subproblems solved through cvxpy

Problems are stated over complex Hermitian PSD matrix variables and
nonnegative scalars. Each Hermitian variable H of size n is modelled as a
real symmetric PSD matrix X of size 2n holding [[Re H, -Im H], [Im H, Re H]],
and every functional pairs a Hermitian coefficient A with H through
Re Tr(A H) = 1/2 <embed(A), X>.
"""
import fd_isac as fi
from fd_isac.utils.linalg import from_real_embedding, hermitian, real_embedding

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple
import logging
import os

import cvxpy as cp
import numpy as np

OPTIMAL = 'optimal'
INFEASIBLE = 'infeasible'
NUMERICAL_FAILURE = 'numerical_failure'

RELATIONS = ('<=', '==', '>=')


@dataclass
class AffineFunctional:
    """ sum_v Re Tr(A_v H_v) + sum_s c_s p_s + constant """
    psd_coeffs: Dict[str, np.ndarray] = field(default_factory=dict)
    scalar_coeffs: Dict[str, float] = field(default_factory=dict)
    constant: float = 0.0

    def __add__(self, other: 'AffineFunctional') -> 'AffineFunctional':
        psd = dict(self.psd_coeffs)
        for name, coeff in other.psd_coeffs.items():
            psd[name] = psd[name] + coeff if name in psd else coeff
        scalars = dict(self.scalar_coeffs)
        for name, coeff in other.scalar_coeffs.items():
            scalars[name] = scalars.get(name, 0.0) + coeff
        return AffineFunctional(psd, scalars, self.constant + other.constant)

    def __mul__(self, factor: float) -> 'AffineFunctional':
        return AffineFunctional({n: factor * c for n, c in self.psd_coeffs.items()},
                                {n: factor * c for n, c in self.scalar_coeffs.items()},
                                factor * self.constant)

    __rmul__ = __mul__

    def __neg__(self) -> 'AffineFunctional':
        return self * -1.0

    def max_abs(self) -> float:
        """ largest coefficient magnitude, constant included """
        values = [abs(self.constant)]
        values += [float(np.max(np.abs(c))) for c in self.psd_coeffs.values() if np.size(c)]
        values += [abs(c) for c in self.scalar_coeffs.values()]
        return max(values)

    def evaluate(self, psd_values: Dict[str, np.ndarray], scalar_values: Dict[str, float]) -> float:
        total = self.constant
        for name, coeff in self.psd_coeffs.items():
            total += np.real(np.trace(coeff @ psd_values[name]))
        for name, coeff in self.scalar_coeffs.items():
            total += coeff * scalar_values[name]
        return float(total)

    def to_expression(self, psd_vars: Dict[str, cp.Variable], scalar_vars: Dict[str, cp.Variable]):
        expr = cp.Constant(self.constant)
        for name, coeff in self.psd_coeffs.items():
            expr = expr + 0.5 * cp.sum(cp.multiply(real_embedding(hermitian(coeff)), psd_vars[name]))
        for name, coeff in self.scalar_coeffs.items():
            if coeff != 0:
                expr = expr + coeff * scalar_vars[name]
        return expr


@dataclass
class LinearConstraint:
    functional: AffineFunctional
    relation: str
    bound: float
    label: str = ''

    def violation(self, psd_values, scalar_values) -> float:
        value = self.functional.evaluate(psd_values, scalar_values)
        if self.relation == '<=':
            return max(value - self.bound, 0.0)
        if self.relation == '>=':
            return max(self.bound - value, 0.0)
        return abs(value - self.bound)

    def scaled(self) -> 'LinearConstraint':
        scale = self.functional.max_abs()
        if scale == 0:
            return self
        return LinearConstraint(self.functional * (1 / scale), self.relation,
                                self.bound / scale, self.label)


@dataclass
class HyperbolicConstraint:
    """ x * y >= c with x, y >= 0 """
    x: AffineFunctional
    y: AffineFunctional
    c: float
    label: str = ''

    def violation(self, psd_values, scalar_values) -> float:
        x = self.x.evaluate(psd_values, scalar_values)
        y = self.y.evaluate(psd_values, scalar_values)
        return max(self.c - x * y, -x, -y, 0.0) / (1.0 + self.c)

    def scaled(self) -> 'HyperbolicConstraint':
        sx = self.x.max_abs() or 1.0
        sy = self.y.max_abs() or 1.0
        return HyperbolicConstraint(self.x * (1 / sx), self.y * (1 / sy),
                                    self.c / (sx * sy), self.label)


@dataclass
class ConicProblem:
    """ minimize objective over Hermitian PSD matrices and nonnegative scalars """
    psd_vars: List[Tuple[str, int]]
    scalar_vars: List[str]
    objective: AffineFunctional
    linear_constraints: List[LinearConstraint] = field(default_factory=list)
    hyperbolic_constraints: List[HyperbolicConstraint] = field(default_factory=list)

    def validate(self):
        dims = dict(self.psd_vars)
        names = set(self.scalar_vars)
        assert len(dims) == len(self.psd_vars), 'duplicate psd variable names'
        assert len(names) == len(self.scalar_vars), 'duplicate scalar variable names'

        functionals = [self.objective]
        functionals += [c.functional for c in self.linear_constraints]
        for c in self.hyperbolic_constraints:
            if c.c < 0:
                raise ValueError(f'hyperbolic constraint {c.label!r} has negative constant {c.c}')
            functionals += [c.x, c.y]
        for c in self.linear_constraints:
            if c.relation not in RELATIONS:
                raise ValueError(f'constraint {c.label!r} has unknown relation {c.relation!r}')

        for f in functionals:
            for name, coeff in f.psd_coeffs.items():
                if name not in dims:
                    raise ValueError(f'unknown psd variable {name!r}')
                if coeff.shape != (dims[name], dims[name]):
                    raise ValueError(f'coefficient for {name!r} has shape {coeff.shape}, '
                                     f'expected {(dims[name], dims[name])}')
                scale = float(np.max(np.abs(coeff))) if coeff.size else 0.0
                if not np.allclose(coeff, coeff.conj().T, rtol=0, atol=1e-10 * scale):
                    raise ValueError(f'coefficient for {name!r} is not Hermitian')
            for name in f.scalar_coeffs:
                if name not in names:
                    raise ValueError(f'unknown scalar variable {name!r}')

    def scaled(self) -> 'ConicProblem':
        return ConicProblem(self.psd_vars, self.scalar_vars, self.objective,
                            [c.scaled() for c in self.linear_constraints],
                            [c.scaled() for c in self.hyperbolic_constraints])

    def max_residual(self, psd_values, scalar_values) -> float:
        """ worst violation over constraints, PSD cones and sign bounds """
        residuals = [0.0]
        for c in self.linear_constraints:
            residuals.append(c.violation(psd_values, scalar_values) / (1.0 + abs(c.bound)))
        for c in self.hyperbolic_constraints:
            residuals.append(c.violation(psd_values, scalar_values))
        for name, _ in self.psd_vars:
            value = psd_values[name]
            if value.size:
                eigvals = np.linalg.eigvalsh(hermitian(value))
                residuals.append(max(-eigvals[0], 0.0) / (1.0 + max(eigvals[-1], 0.0)))
        for name in self.scalar_vars:
            residuals.append(max(-scalar_values[name], 0.0))
        return float(max(residuals))


@dataclass
class ConicSolution:
    status: str
    psd_values: Dict[str, np.ndarray] = field(default_factory=dict)
    scalar_values: Dict[str, float] = field(default_factory=dict)
    objective_value: float = np.nan
    max_residual: float = np.nan

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def default_solver() -> str:
    """ Clarabel when installed, SCS otherwise """
    installed = cp.installed_solvers()
    return 'CLARABEL' if 'CLARABEL' in installed else 'SCS'


def _solver_options(solver: str, tol: float) -> dict:
    if solver == 'CLARABEL':
        return dict(tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol)
    if solver == 'SCS':
        return dict(eps_abs=tol, eps_rel=tol, max_iters=100000)
    return {}


def _solve_constant(problem: ConicProblem) -> ConicSolution:
    """ problems without variables reduce to checking constants """
    residual = problem.max_residual({}, {})
    if residual > fi.RESIDUAL_TOL:
        return ConicSolution(status=INFEASIBLE, max_residual=residual)
    return ConicSolution(status=OPTIMAL, objective_value=problem.objective.constant,
                         max_residual=residual)


def solve(problem: ConicProblem, tol: float = fi.CONIC_TOL, solver: str = None) -> ConicSolution:
    """ solves the problem with every constraint row scaled to unit
    max-magnitude. the reported objective is evaluated on the unscaled
    objective at the returned point; residuals refer to the scaled rows.
    """
    problem.validate()
    if not problem.psd_vars and not problem.scalar_vars:
        return _solve_constant(problem)

    scaled = problem.scaled()
    solver = solver or default_solver()

    embedded = {name: cp.Variable((2 * n, 2 * n), symmetric=True) for name, n in problem.psd_vars}
    scalars = {name: cp.Variable(nonneg=True) for name in problem.scalar_vars}

    constraints = []
    for name, n in problem.psd_vars:
        X = embedded[name]
        constraints += [X >> 0,
                        X[:n, :n] == X[n:, n:],
                        X[:n, n:] == -X[n:, :n]]

    for c in scaled.linear_constraints:
        lhs = c.functional.to_expression(embedded, scalars)
        if c.relation == '<=':
            constraints.append(lhs <= c.bound)
        elif c.relation == '>=':
            constraints.append(lhs >= c.bound)
        else:
            constraints.append(lhs == c.bound)

    for c in scaled.hyperbolic_constraints:
        x = c.x.to_expression(embedded, scalars)
        y = c.y.to_expression(embedded, scalars)
        # rotated cone x y >= c as || [2 sqrt(c), x - y] || <= x + y
        stacked = cp.hstack([cp.Constant(np.array([2 * np.sqrt(c.c)])),
                             cp.reshape(x - y, (1,), order='F')])
        constraints.append(cp.SOC(x + y, stacked))

    objective = cp.Minimize(problem.objective.to_expression(embedded, scalars))
    cvx_problem = cp.Problem(objective, constraints)

    try:
        cvx_problem.solve(solver=solver, **_solver_options(solver, tol))
    except cp.SolverError as e:
        logging.warning(f'{solver} failed: {e}')
        return ConicSolution(status=NUMERICAL_FAILURE)

    if cvx_problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return ConicSolution(status=INFEASIBLE)
    if cvx_problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        logging.warning(f'{solver} returned status {cvx_problem.status}')
        return ConicSolution(status=NUMERICAL_FAILURE)

    psd_values = {name: from_real_embedding(X.value) for name, X in embedded.items()}
    scalar_values = {name: float(s.value) if s.value is not None else 0.0
                     for name, s in scalars.items()}
    residual = scaled.max_residual(psd_values, scalar_values)
    status = OPTIMAL
    if residual > fi.RESIDUAL_TOL:
        logging.warning(f'{solver} reported {cvx_problem.status} '
                        f'but the worst residual is {residual:.2e}')
        status = NUMERICAL_FAILURE

    return ConicSolution(status=status, psd_values=psd_values, scalar_values=scalar_values,
                         objective_value=problem.objective.evaluate(psd_values, scalar_values),
                         max_residual=residual)


def _functional_triplets(f: AffineFunctional, constraint_id: str):
    for name, coeff in f.psd_coeffs.items():
        coeff = hermitian(coeff)
        n = coeff.shape[0]
        for i in range(n):
            if coeff[i, i].real != 0:
                yield f'{name}[{i},{i}].re', coeff[i, i].real, constraint_id
            for j in range(i + 1, n):
                if coeff[i, j].real != 0:
                    yield f'{name}[{i},{j}].re', 2 * coeff[i, j].real, constraint_id
                if coeff[i, j].imag != 0:
                    yield f'{name}[{i},{j}].im', 2 * coeff[i, j].imag, constraint_id
    for name, coeff in f.scalar_coeffs.items():
        if coeff != 0:
            yield name, coeff, constraint_id
    if f.constant != 0:
        yield 'const', f.constant, constraint_id


def dump_problem(problem: ConicProblem, path):
    """ writes the problem as `variable coefficient constraint_id` triplets.

    Hermitian variables appear on their upper triangle as V[i,j].re and
    V[i,j].im; the coefficients are those of Re Tr(A H) written in those
    real coordinates. header comments give each constraint's relation
    and bound (hyperbolic constraints: `<id>.x * <id>.y >= c`).
    """
    os.makedirs(Path(path).parent, exist_ok=True)
    header, triplets = [], []

    header.append('objective minimize')
    triplets += _functional_triplets(problem.objective, 'objective')
    for i, c in enumerate(problem.linear_constraints):
        cid = c.label or f'linear{i}'
        header.append(f'{cid} {c.relation} {float(c.bound)!r}')
        triplets += _functional_triplets(c.functional, cid)
    for i, c in enumerate(problem.hyperbolic_constraints):
        cid = c.label or f'hyperbolic{i}'
        header.append(f'{cid}.x * {cid}.y >= {float(c.c)!r}')
        triplets += _functional_triplets(c.x, f'{cid}.x')
        triplets += _functional_triplets(c.y, f'{cid}.y')

    with open(path, 'w') as f:
        names = [f'{n}:{d}' for n, d in problem.psd_vars] + list(problem.scalar_vars)
        f.write('# variables: ' + ' '.join(names) + '\n')
        for line in header:
            f.write(f'# {line}\n')
        for var, coeff, cid in triplets:
            f.write(f'{var} {float(coeff)!r} {cid}\n')
