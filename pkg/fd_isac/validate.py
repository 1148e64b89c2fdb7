"""validate.py - oracle suites behind the `validate` command

each suite returns rows of (suite, case, value, tolerance, passed); a row
passes when value <= tolerance.
"""
import fd_isac as fi
from fd_isac.conic import (AffineFunctional, ConicProblem, HyperbolicConstraint,
                           LinearConstraint)
from fd_isac.receivers import optimal_receivers, principal_generalized_eigenvalue
from fd_isac.sca import ScaError, extract_rank_one, linearize_radar, run_sca, solve_joint
from fd_isac.scenario import SystemConfig, realize_channels
from fd_isac.signal_metrics import (RelaxedDesign, TransmitDesign, beampattern_frame, covariance_q,
                                    pattern_shape, radar_sinr, radar_interference_covariance,
                                    simulate_symbols, sinr_report)
from fd_isac.utils.linalg import cn, eig_ratio, hermitian, outer, solve_pd

from pathlib import Path
from typing import List
import logging

import numpy as np
import pandas as pd
import tqdm

EXIT_VALIDATION_FAILED = 1


def _row(suite: str, case: str, value: float, tolerance: float) -> dict:
    return {'suite': suite, 'case': case, 'value': float(value),
            'tolerance': float(tolerance), 'passed': bool(value <= tolerance)}


def _rel(a, b) -> float:
    return float(abs(a - b) / max(abs(b), 1e-300))


def random_transmit_design(ch, rng: np.random.Generator, power_mw: float = 1.0) -> TransmitDesign:
    """ random beamformers, a random full-rank radar covariance and random
    uplink powers, each block carrying roughly power_mw
    """
    n_tx = ch.n_tx
    v_dl = cn(rng, (ch.n_dl, n_tx), power_mw / n_tx)
    F = cn(rng, (n_tx, n_tx), power_mw / n_tx ** 2)
    p_ul = rng.uniform(0.1, 1.0, ch.n_ul) * power_mw
    return TransmitDesign(v_dl=v_dl, V0=hermitian(F @ F.conj().T), p_ul=p_ul)


def random_pd(rng: np.random.Generator, n: int, floor: float = 0.1) -> np.ndarray:
    F = cn(rng, (n, n))
    return hermitian(F @ F.conj().T) + floor * np.eye(n)


def receiver_optimality(n_scenarios: int = 100, n_challengers: int = 1000, seed: int = fi.SEED) -> List[dict]:
    """ the closed-form radar combiner attains the principal generalized
    eigenvalue and beats random challengers
    """
    rng = np.random.default_rng(seed)
    cfg = SystemConfig()
    worst_eig, worst_margin = 0.0, 0.0
    for i in tqdm.tqdm(range(n_scenarios), disable=fi.TQDM_DISABLE, desc='receivers'):
        ch = realize_channels(cfg, seed=seed + i)
        d = random_transmit_design(ch, rng)
        best = radar_sinr(d, optimal_receivers(d, ch).u, ch)
        worst_eig = max(worst_eig, _rel(best, principal_generalized_eigenvalue(d, ch)))

        # all challengers at once: u^H S u / u^H psi u
        U = cn(rng, (n_challengers, ch.n_rx))
        S = ch.target_gain * ch.A0 @ covariance_q(d) @ ch.A0.conj().T
        psi = radar_interference_covariance(d, ch)
        num = np.real(np.einsum('ci,ij,cj->c', U.conj(), S, U))
        den = np.real(np.einsum('ci,ij,cj->c', U.conj(), psi, U))
        worst_margin = max(worst_margin, float(np.max(num / den) / best - 1.0))

    return [_row('receiver_optimality', 'generalized-eigenvalue', worst_eig, 1e-8),
            _row('receiver_optimality', 'challenger-excess', max(worst_margin, 0.0), 1e-12)]


def underestimator(n_samples: int = 10000, n: int = 8, seed: int = fi.SEED) -> List[dict]:
    """ the linearized bound never exceeds a^H psi^-1 a and is tight at the expansion point """
    rng = np.random.default_rng(seed)
    worst_violation, worst_tight = 0.0, 0.0
    for _ in range(n_samples):
        a = cn(rng, n)
        psi_prev = random_pd(rng, n)
        psi = random_pd(rng, n)
        bound = linearize_radar(psi_prev, a)
        true = float(np.real(a.conj() @ solve_pd(psi, a)))
        worst_violation = max(worst_violation, (bound(psi) - true) / true)
        true_prev = float(np.real(a.conj() @ solve_pd(psi_prev, a)))
        worst_tight = max(worst_tight, _rel(bound(psi_prev), true_prev))
    return [_row('underestimator', 'lower-bound-violation', max(worst_violation, 0.0), 1e-9),
            _row('underestimator', 'tight-at-expansion', worst_tight, 1e-12)]


def oracle_equivalence(n_designs: int = 10, n_frames: int = 100000, seed: int = fi.SEED) -> List[dict]:
    """ closed-form SINRs against the symbol-level simulation """
    rng = np.random.default_rng(seed)
    cfg = SystemConfig()
    # signal and interference powers are means of exponential-like samples
    tolerance = max(0.02, 4.5 * np.sqrt(2.0 / n_frames))
    worst = 0.0
    for i in tqdm.tqdm(range(n_designs), disable=fi.TQDM_DISABLE, desc='monte-carlo'):
        ch = realize_channels(cfg, seed=seed + i)
        d = random_transmit_design(ch, rng)
        receivers = optimal_receivers(d, ch)
        exact = sinr_report(d, receivers, ch)
        estimate = simulate_symbols(d, ch, n_frames, seed=seed + i, receivers=receivers)
        pairs = [(estimate.radar, exact.radar)]
        pairs += list(zip(estimate.uplink, exact.uplink))
        pairs += list(zip(estimate.downlink, exact.downlink))
        worst = max(worst, max(_rel(e, x) for e, x in pairs))
    return [_row('oracle_equivalence', 'closed-form-vs-simulation', worst, tolerance)]


def conic_examples() -> List[ConicProblem]:
    """ hand-solvable problems with optimum 1, 4 and 4 """
    a = np.array([1.0, 1.0j, -1.0]) / np.sqrt(3)
    trace_min = ConicProblem(
        psd_vars=[('V', 3)], scalar_vars=[],
        objective=AffineFunctional({'V': np.eye(3, dtype=complex)}),
        linear_constraints=[LinearConstraint(AffineFunctional({'V': outer(a)}), '>=', 1.0, 'unit')])
    degenerate = ConicProblem(
        psd_vars=[], scalar_vars=['p'],
        objective=AffineFunctional(scalar_coeffs={'p': 1.0}),
        hyperbolic_constraints=[HyperbolicConstraint(AffineFunctional(scalar_coeffs={'p': 1.0}),
                                                     AffineFunctional(constant=1.0), 4.0, 'p-times-one')])
    am_gm = ConicProblem(
        psd_vars=[], scalar_vars=['x', 'y'],
        objective=AffineFunctional(scalar_coeffs={'x': 1.0, 'y': 1.0}),
        hyperbolic_constraints=[HyperbolicConstraint(AffineFunctional(scalar_coeffs={'x': 1.0}),
                                                     AffineFunctional(scalar_coeffs={'y': 1.0}),
                                                     4.0, 'xy')])
    return [trace_min, degenerate, am_gm]


def conic_sanity() -> List[dict]:
    rows = []
    for name, problem, optimum in zip(('trace-min', 'degenerate-hyperbolic', 'am-gm'),
                                      conic_examples(), (1.0, 4.0, 4.0)):
        sol = fi.conic.solve(problem)
        error = _rel(sol.objective_value, optimum) if sol.ok else np.inf
        rows.append(_row('conic_sanity', name, error, 1e-6))
    return rows


def extraction(n_cases: int = 100, seed: int = fi.SEED) -> List[dict]:
    """ rank-one extraction on random PSD relaxed designs """
    rng = np.random.default_rng(seed)
    cfg = SystemConfig()
    worst_power, worst_gain, worst_cov, worst_rank, worst_psd = 0.0, 0.0, 0.0, 0.0, 0.0
    for i in range(n_cases):
        ch = realize_channels(cfg, seed=seed + i)
        V_dl = np.stack([random_pd(rng, ch.n_tx, floor=0.0) for _ in range(ch.n_dl)])
        hat = RelaxedDesign(V_dl=V_dl, V0=random_pd(rng, ch.n_tx, floor=0.0), p_ul=rng.uniform(size=ch.n_ul))
        d = extract_rank_one(hat, ch)

        worst_power = max(worst_power, _rel(d.total_power, hat.total_power))
        gains_hat = np.real(np.einsum('li,lij,lj->l', ch.g_dl.conj(), hat.V_dl, ch.g_dl))
        gains = np.abs(np.einsum('li,li->l', ch.g_dl.conj(), d.v_dl)) ** 2
        worst_gain = max(worst_gain, float(np.max(np.abs(gains - gains_hat) / gains_hat)))
        Q_hat, Q = covariance_q(hat), covariance_q(d)
        worst_cov = max(worst_cov, float(np.linalg.norm(Q - Q_hat) / np.linalg.norm(Q_hat)))
        worst_rank = max(worst_rank, max(eig_ratio(V) for V in d.dl_matrices))
        eigvals = np.linalg.eigvalsh(d.V0)
        worst_psd = max(worst_psd, -eigvals[0] / np.real(np.trace(d.V0)))

    return [_row('extraction', 'power-preserved', worst_power, 1e-10),
            _row('extraction', 'dl-gain-preserved', worst_gain, 1e-10),
            _row('extraction', 'covariance-preserved', worst_cov, 1e-10),
            _row('extraction', 'rank-one', worst_rank, 1e-6),
            _row('extraction', 'radar-covariance-psd', max(worst_psd, 0.0), fi.PSD_TOL)]


def sca_descent(n_seeds: int = 20, seed: int = fi.SEED) -> List[dict]:
    """ monotone descent and convergence on the default scenario """
    cfg = SystemConfig()
    n_converged, worst_ascent = 0, 0.0
    for i in tqdm.tqdm(range(n_seeds), disable=fi.TQDM_DISABLE, desc='sca'):
        ch = realize_channels(cfg, seed=seed + i)
        try:
            _, trace = run_sca(ch, cfg)
        except ScaError as e:
            logging.warning(f'seed {seed + i}: {e}')
            continue
        n_converged += trace.converged
        objectives = np.asarray(trace.objectives)
        ascent = np.max(np.diff(objectives) / objectives[:-1]) if objectives.size > 1 else 0.0
        worst_ascent = max(worst_ascent, float(ascent))
    return [_row('sca_descent', 'objective-ascent', max(worst_ascent, 0.0), 1e-9),
            _row('sca_descent', 'non-converged-fraction', 1 - n_converged / n_seeds, 0.05)]


def beampattern_shape(n_seeds: int = 20, seed: int = fi.SEED, null_depth_db: float = 15.0) -> List[dict]:
    """ fraction of seeds whose optimized beampattern does not peak at the
    target on a 1 degree grid, and fraction whose interferer nulls sit less
    than null_depth_db below the peak. seeds without a design count as misses
    """
    cfg = SystemConfig()
    grid = fi.experiment.angle_grid(1.0)
    off_target, shallow = 0, 0
    for i in tqdm.tqdm(range(n_seeds), disable=fi.TQDM_DISABLE, desc='beampattern'):
        ch = realize_channels(cfg, seed=seed + i)
        try:
            design, receivers, _ = solve_joint(ch, cfg)
        except ScaError as e:
            logging.warning(f'seed {seed + i}: {e}')
            off_target, shallow = off_target + 1, shallow + 1
            continue
        frame = beampattern_frame(receivers.u, design, ch, grid)
        peak, depth = pattern_shape(frame, cfg.interferer_angles_deg)
        off_target += not np.isclose(peak, cfg.target_angle_deg)
        shallow += depth < null_depth_db
        logging.debug(f'seed {seed + i}: peak at {peak:g} deg, null depth {depth:.1f} dB')
    return [_row('beampattern', 'peak-off-target-fraction', off_target / n_seeds, 0.1),
            _row('beampattern', 'shallow-null-fraction', shallow / n_seeds, 0.1)]


def run_validation(quick: bool = False, seed: int = fi.SEED) -> pd.DataFrame:
    scale = 10 if quick else 1
    rows = []
    rows += conic_sanity()
    rows += receiver_optimality(n_scenarios=100 // scale, seed=seed)
    rows += underestimator(n_samples=10000 // scale, seed=seed)
    rows += extraction(n_cases=100 // scale, seed=seed)
    rows += oracle_equivalence(n_designs=3 if quick else 10, n_frames=100000 // scale, seed=seed)
    rows += sca_descent(n_seeds=2 if quick else 20, seed=seed)
    if not quick:
        rows += beampattern_shape(n_seeds=20, seed=seed)
    return pd.DataFrame(rows)


def cmd_validate(out_dir=None, quick: bool = False, seed: int = None) -> int:
    out_dir = Path(out_dir or fi.RESULTS_DIR / 'validation')
    out_dir.mkdir(parents=True, exist_ok=True)
    df = run_validation(quick=quick, seed=fi.SEED if seed is None else seed)
    df.to_csv(out_dir / 'validation.csv', index=False)

    checks = pd.DataFrame({'check': df['suite'] + '/' + df['case'],
                           'passed': df['passed'],
                           'detail': [f'{v:.3e} (tolerance {t:.1e})'
                                      for v, t in zip(df['value'], df['tolerance'])]})
    fi.analyze.print_checks(checks)
    logging.info(f'wrote validation results to {out_dir}')
    return 0 if df['passed'].all() else EXIT_VALIDATION_FAILED
