import fd_isac as fi
from fd_isac.conic import (INFEASIBLE, OPTIMAL, AffineFunctional, ConicProblem,
                           HyperbolicConstraint, LinearConstraint, dump_problem, solve)
from fd_isac.utils.linalg import outer
from fd_isac.validate import conic_examples

import numpy as np
import pytest


def test_hand_solved_optima():
    trace_min, degenerate, am_gm = conic_examples()

    sol = solve(trace_min)
    assert sol.status == OPTIMAL
    assert sol.objective_value == pytest.approx(1.0, rel=1e-6)
    a = np.array([1.0, 1.0j, -1.0]) / np.sqrt(3)
    np.testing.assert_allclose(sol.psd_values['V'], outer(a), atol=1e-3)

    sol = solve(degenerate)
    assert sol.ok
    assert sol.scalar_values['p'] == pytest.approx(4.0, rel=1e-6)

    sol = solve(am_gm)
    assert sol.ok
    assert sol.objective_value == pytest.approx(4.0, rel=1e-6)
    assert sol.scalar_values['x'] == pytest.approx(2.0, rel=1e-3)
    assert sol.scalar_values['y'] == pytest.approx(2.0, rel=1e-3)


def test_badly_scaled_rows():
    # the same trace minimization with a 1e-10 channel gain
    a = np.array([1.0, 1.0j, -1.0]) / np.sqrt(3)
    problem = ConicProblem(
        psd_vars=[('V', 3)], scalar_vars=[],
        objective=AffineFunctional({'V': np.eye(3, dtype=complex)}),
        linear_constraints=[LinearConstraint(AffineFunctional({'V': 1e-10 * outer(a)}), '>=', 2e-10)])
    sol = solve(problem)
    assert sol.ok
    assert sol.objective_value == pytest.approx(2.0, rel=1e-6)


def test_infeasible():
    problem = ConicProblem(
        psd_vars=[], scalar_vars=['p'],
        objective=AffineFunctional(scalar_coeffs={'p': 1.0}),
        linear_constraints=[LinearConstraint(AffineFunctional(scalar_coeffs={'p': 1.0}), '<=', -1.0)])
    assert solve(problem).status == INFEASIBLE


def test_constant_problem():
    empty = ConicProblem(psd_vars=[], scalar_vars=[], objective=AffineFunctional(constant=0.0))
    sol = solve(empty)
    assert sol.ok and sol.objective_value == 0

    impossible = ConicProblem(psd_vars=[], scalar_vars=[], objective=AffineFunctional(),
                              linear_constraints=[LinearConstraint(AffineFunctional(constant=1.0), '<=', 0.0)])
    assert solve(impossible).status == INFEASIBLE


def test_validation_errors():
    with pytest.raises(ValueError, match='not Hermitian'):
        ConicProblem(psd_vars=[('V', 2)], scalar_vars=[],
                     objective=AffineFunctional({'V': np.array([[0, 1], [0, 0]], dtype=complex)})).validate()
    with pytest.raises(ValueError, match='unknown'):
        ConicProblem(psd_vars=[], scalar_vars=['p'],
                     objective=AffineFunctional(scalar_coeffs={'q': 1.0})).validate()
    with pytest.raises(ValueError, match='negative constant'):
        ConicProblem(psd_vars=[], scalar_vars=['p'], objective=AffineFunctional(),
                     hyperbolic_constraints=[HyperbolicConstraint(
                         AffineFunctional(scalar_coeffs={'p': 1.0}), AffineFunctional(constant=1.0), -1.0)]).validate()


def test_functional_algebra():
    f = AffineFunctional({'V': np.eye(2)}, {'p': 2.0}, 1.0)
    g = AffineFunctional({'V': np.eye(2)}, {'q': 1.0}, -1.0)
    h = 2 * f + (-g)
    assert h.constant == 3.0
    assert h.scalar_coeffs == {'p': 4.0, 'q': -1.0}
    np.testing.assert_allclose(h.psd_coeffs['V'], np.eye(2))
    assert h.max_abs() == 4.0
    assert h.evaluate({'V': np.diag([1.0, 2.0])}, {'p': 1.0, 'q': 1.0}) == pytest.approx(3 + 4 - 1 + 3)


def test_scaled_residuals():
    c = HyperbolicConstraint(AffineFunctional(scalar_coeffs={'x': 0.25}),
                             AffineFunctional(scalar_coeffs={'y': 1.0}), 1.0)
    s = c.scaled()
    assert s.c == pytest.approx(4.0)
    assert s.violation({}, {'x': 2.0, 'y': 2.0}) == 0
    assert s.violation({}, {'x': 1.0, 'y': 1.0}) == pytest.approx(3.0 / 5.0)


def test_default_solver():
    assert fi.conic.default_solver() in ('CLARABEL', 'SCS')


def test_dump_problem(tmp_path):
    trace_min, _, am_gm = conic_examples()
    path = tmp_path / 'trace-min.txt'
    dump_problem(trace_min, path)
    lines = path.read_text().splitlines()
    assert lines[0] == '# variables: V:3'
    assert '# unit >= 1.0' in lines
    body = [l.split() for l in lines if not l.startswith('#')]
    objective = [(var, float(coeff)) for var, coeff, cid in body if cid == 'objective']
    assert objective == [('V[0,0].re', 1.0), ('V[1,1].re', 1.0), ('V[2,2].re', 1.0)]
    # a a^H has entry (0,1) = -j/3: Re 0, 2 Im = -2/3
    unit = {var: float(coeff) for var, coeff, cid in body if cid == 'unit'}
    assert unit['V[0,1].im'] == pytest.approx(-2 / 3)
    assert 'V[0,1].re' not in unit

    dump_problem(am_gm, path)
    lines = path.read_text().splitlines()
    assert '# xy.x * xy.y >= 4.0' in lines
    assert 'x 1.0 xy.x' in lines
