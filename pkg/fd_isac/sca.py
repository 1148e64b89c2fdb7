"""sca.py - successive convex approximation for joint FD-ISAC beamforming

The nonconvex radar and uplink SINR constraints are replaced, around the
previous iterate, by first-order lower bounds of the inverse quadratic
forms a^H psi^-1 a and h_k^H phi_k^-1 h_k. Each iterate is the optimum of a
relaxed (rank-free) conic subproblem; rank-one downlink beamformers are
recovered from the final iterate without changing its power or SINRs.
"""
import fd_isac as fi
from fd_isac.conic import (AffineFunctional, ConicProblem, ConicSolution,
                           HyperbolicConstraint, LinearConstraint)
from fd_isac.receivers import (ReceiveDesign, build_whitening, optimal_receivers,
                               reduced_radar_sinr, reduced_uplink_sinr)
from fd_isac.scenario import ChannelSet, ConfigError, SystemConfig
from fd_isac.signal_metrics import (RelaxedDesign, SinrReport, TransmitDesign,
                                    downlink_sinr, interference_matrices, sinr_report)
from fd_isac.utils.linalg import clip_psd, eig_ratio, hermitian, lin2db, outer, solve_pd

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple
import logging

import numpy as np
import pandas as pd

CONVERGED = 'converged'
MAX_ITERS = 'max_iters'
INFEASIBLE_INIT = 'infeasible_init'
SUBPROBLEM_FAILURE = 'subproblem_failure'

# uniform scale-ups tried to lift an over-relaxed point clear of solver noise
FEASIBILITY_SCALES = (1.0, 1.0 + 1e-6, 1.0 + 1e-5, 1.0 + 1e-4)


@dataclass(frozen=True)
class ScaSettings:
    max_iters: int = 50
    rel_obj_tol: float = 1e-4
    init_power_mw: float = 1.0
    init_growth: float = 10.0
    max_init_attempts: int = 8
    feas_tol_db: float = 0.01
    conic_tol: float = fi.CONIC_TOL
    # total power cap (90 dBm) keeping unsatisfiable thresholds infeasible
    max_power_mw: float = 1e6
    # largest over-relaxation factor of an SCA step, 1 gives plain SCA
    max_overrelax: float = 8.0
    solver: str = None

    def __post_init__(self):
        checks = {
            'max_iters': self.max_iters >= 1,
            'rel_obj_tol': self.rel_obj_tol > 0,
            'init_power_mw': self.init_power_mw > 0,
            'init_growth': self.init_growth > 1,
            'max_init_attempts': self.max_init_attempts >= 1,
            'feas_tol_db': self.feas_tol_db >= 0,
            'conic_tol': self.conic_tol > 0,
            'max_power_mw': self.max_power_mw > 0,
            'max_overrelax': self.max_overrelax >= 1,
        }
        for key, ok in checks.items():
            if not ok:
                raise ConfigError(f'invalid value {getattr(self, key)!r}', key)

    @classmethod
    def from_entry(cls, entry: dict) -> 'ScaSettings':
        if entry is None:
            return cls()
        if not isinstance(entry, dict):
            raise ConfigError(f'expected a mapping, got {type(entry).__name__}', 'sca')
        known = {f.name for f in fields(cls)}
        for key in entry:
            if key not in known:
                raise ConfigError(f'unknown key {key!r}', key)
        try:
            kwargs = {}
            for key, value in entry.items():
                if key in ('max_iters', 'max_init_attempts'):
                    value = int(value)
                elif key != 'solver':
                    value = float(value)
                kwargs[key] = value
        except (TypeError, ValueError) as e:
            raise ConfigError(f'{key}: expected a number, got {entry[key]!r}', key) from e
        return cls(**kwargs)


@dataclass
class SolverTrace:
    objectives: List[float] = field(default_factory=list)
    statuses: List[str] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    rank_ratios: List[float] = field(default_factory=list)
    steps: List[float] = field(default_factory=list)
    termination: str = None
    final_sinrs: SinrReport = None
    iterations_used: int = 0
    init_power_mw: float = np.nan
    feasible: bool = False
    slacks_db: Dict[str, float] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.termination == CONVERGED

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'iteration': np.arange(1, len(self.statuses) + 1),
                             'objective_mw': self.objectives,
                             'status': self.statuses,
                             'max_residual': self.residuals,
                             'rank_ratio': self.rank_ratios,
                             'step': self.steps})


class ScaError(RuntimeError):
    """ the SCA run stopped without a design. `trace` holds the progress so far """

    def __init__(self, message: str, trace: SolverTrace):
        super().__init__(message)
        self.trace = trace


class InfeasibleStartError(ScaError):
    pass


class SubproblemFailureError(ScaError):
    pass


class DegenerateSolutionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class InverseQuadraticBound:
    """ first-order lower bound of psi -> a^H psi^-1 a around psi_prev:

        f(psi) = 2 a^H psi_prev^-1 a - z^H psi z,   z = psi_prev^-1 a

    tight at psi_prev, below the true value on every PD psi.
    """
    z: np.ndarray
    anchor: float

    def __call__(self, psi: np.ndarray) -> float:
        return float(2 * self.anchor - np.real(self.z.conj() @ psi @ self.z))


def _inverse_quadratic_bound(matrix_prev: np.ndarray, direction: np.ndarray) -> InverseQuadraticBound:
    # raises on a singular (non PD) expansion point
    z = solve_pd(matrix_prev, direction)
    anchor = float(np.real(direction.conj() @ z))
    return InverseQuadraticBound(z=z, anchor=anchor)


def linearize_radar(psi_prev: np.ndarray, a_r0: np.ndarray) -> Callable[[np.ndarray], float]:
    return _inverse_quadratic_bound(psi_prev, a_r0)


def linearize_uplink(phi_k_prev: np.ndarray, h_k: np.ndarray) -> Callable[[np.ndarray], float]:
    return _inverse_quadratic_bound(phi_k_prev, h_k)


def dl_var(l: int) -> str:
    return f'V{l + 1}'


def ul_var(k: int) -> str:
    return f'p{k + 1}'


RADAR_VAR = 'V0'


def _transmit_vars(n_dl: int, radar_covariance: bool) -> List[str]:
    names = [RADAR_VAR] if radar_covariance else []
    return names + [dl_var(l) for l in range(n_dl)]


def _bound_functional(bound: InverseQuadraticBound, ch: ChannelSet, mixing: np.ndarray,
                      transmit_vars: List[str], exclude: int = None) -> AffineFunctional:
    """ the bound as an affine functional of the design variables, where
    psi = sum_k p_k h_k h_k^H + M Q M^H + noise I (user `exclude` left out)
    """
    z = bound.z
    transmit = -outer(mixing.conj().T @ z)
    psd = {name: transmit for name in transmit_vars}
    gains = np.abs(ch.h_ul.conj() @ z) ** 2
    scalars = {ul_var(k): -float(gains[k]) for k in range(ch.n_ul) if k != exclude}
    constant = 2 * bound.anchor - ch.noise_bs * float(np.real(z.conj() @ z))
    return AffineFunctional(psd, scalars, constant)


def initial_design(ch: ChannelSet, power_mw: float, radar_covariance: bool = True) -> RelaxedDesign:
    """ splits power_mw evenly between MRT downlink matrices and an
    isotropic radar covariance, and evenly between uplink users.
    """
    n_tx, n_dl, n_ul = ch.n_tx, ch.n_dl, ch.n_ul
    share = power_mw / (n_dl + 1)
    V_dl = np.zeros((n_dl, n_tx, n_tx), dtype=complex)
    for l in range(n_dl):
        g = ch.g_dl[l] / np.linalg.norm(ch.g_dl[l])
        V_dl[l] = share * outer(g)
    V0 = share * np.eye(n_tx) / n_tx if radar_covariance else np.zeros((n_tx, n_tx), dtype=complex)
    p_ul = np.full(n_ul, power_mw / n_ul) if n_ul else np.zeros(0)
    return RelaxedDesign(V_dl=V_dl, V0=V0.astype(complex), p_ul=p_ul)


def build_subproblem(prev: RelaxedDesign, ch: ChannelSet, cfg: SystemConfig,
                     sensing: bool = True, radar_covariance: bool = True,
                     max_power_mw: float = None) -> ConicProblem:
    """ convex subproblem around `prev`: minimize total power subject to
    the linearized radar and uplink constraints (rotated cones) and the
    downlink SINR constraints (linear). disabled thresholds (0 linear)
    drop their constraint.
    """
    n_tx, n_dl, n_ul = ch.n_tx, ch.n_dl, ch.n_ul
    transmit_vars = _transmit_vars(n_dl, radar_covariance)
    identity = np.eye(n_tx, dtype=complex)

    objective = AffineFunctional({name: identity for name in transmit_vars},
                                 {ul_var(k): 1.0 for k in range(n_ul)})
    problem = ConicProblem(psd_vars=[(name, n_tx) for name in transmit_vars],
                           scalar_vars=[ul_var(k) for k in range(n_ul)],
                           objective=objective)

    B, C = interference_matrices(ch)
    whitening = build_whitening(prev, ch)

    if sensing and cfg.radar_threshold > 0:
        bound = linearize_radar(whitening.psi, ch.a_r0)
        x = _bound_functional(bound, ch, B, transmit_vars)
        y = AffineFunctional({name: outer(ch.a_t0) for name in transmit_vars})
        problem.hyperbolic_constraints.append(
            HyperbolicConstraint(x, y, cfg.radar_threshold / ch.target_gain, label='radar'))

    ul_thresholds = cfg.ul_thresholds
    for k in range(n_ul):
        if ul_thresholds[k] <= 0:
            continue
        bound = linearize_uplink(whitening.phi[k], ch.h_ul[k])
        x = _bound_functional(bound, ch, C, transmit_vars, exclude=k)
        y = AffineFunctional(scalar_coeffs={ul_var(k): 1.0})
        problem.hyperbolic_constraints.append(
            HyperbolicConstraint(x, y, float(ul_thresholds[k]), label=f'ul_{k + 1}'))

    dl_thresholds = cfg.dl_thresholds
    for l in range(n_dl):
        if dl_thresholds[l] <= 0:
            continue
        G = outer(ch.g_dl[l])
        coeffs = {name: -G for name in transmit_vars}
        coeffs[dl_var(l)] = G / dl_thresholds[l]
        problem.linear_constraints.append(
            LinearConstraint(AffineFunctional(coeffs), '>=', float(ch.noise_dl[l]), label=f'dl_{l + 1}'))

    if max_power_mw is not None:
        problem.linear_constraints.append(
            LinearConstraint(objective, '<=', float(max_power_mw), label='power_cap'))

    return problem


def design_from_solution(sol: ConicSolution, ch: ChannelSet, radar_covariance: bool = True) -> RelaxedDesign:
    """ reads a relaxed design off a solution, projecting matrices on the PSD cone """
    n_tx = ch.n_tx
    V_dl = np.zeros((ch.n_dl, n_tx, n_tx), dtype=complex)
    for l in range(ch.n_dl):
        V_dl[l] = clip_psd(sol.psd_values[dl_var(l)])
    V0 = clip_psd(sol.psd_values[RADAR_VAR]) if radar_covariance \
        else np.zeros((n_tx, n_tx), dtype=complex)
    p_ul = np.array([max(sol.scalar_values[ul_var(k)], 0.0) for k in range(ch.n_ul)])
    return RelaxedDesign(V_dl=V_dl, V0=V0, p_ul=p_ul)


def relaxed_sinrs(d: RelaxedDesign, ch: ChannelSet) -> SinrReport:
    """ radar and uplink SINRs at the optimal combiners plus relaxed downlink SINRs """
    whitening = build_whitening(d, ch)
    return SinrReport(radar=reduced_radar_sinr(d, ch, whitening),
                      uplink=reduced_uplink_sinr(d, ch, whitening),
                      downlink=downlink_sinr(d, ch))


def constraint_slacks(report: SinrReport, cfg: SystemConfig, sensing: bool = True) -> Dict[str, float]:
    """ SINR minus threshold per constraint, dB. disabled constraints give +inf """
    def slack(value, threshold_db):
        if threshold_db == -np.inf:
            return np.inf
        return float(lin2db(value) - threshold_db)

    slacks = {'radar': slack(report.radar, cfg.radar_sinr_db) if sensing else np.inf}
    for k, value in enumerate(report.uplink):
        slacks[f'ul_{k + 1}'] = slack(value, cfg.ul_sinr_db[k])
    for l, value in enumerate(report.downlink):
        slacks[f'dl_{l + 1}'] = slack(value, cfg.dl_sinr_db[l])
    return slacks


def subproblem_complexity(n_tx: int, n_dl: int, n_ul: int) -> float:
    """ order of the interior-point cost of one subproblem """
    return n_tx ** 6.5 * n_dl ** 3.5 + n_tx ** 4 * n_dl ** 2 * n_ul ** 1.5


def _record(trace: SolverTrace, sol: ConicSolution, design: RelaxedDesign = None,
            step: float = 1.0):
    trace.statuses.append(sol.status)
    trace.residuals.append(sol.max_residual)
    if design is None:
        trace.objectives.append(np.nan)
        trace.rank_ratios.append(np.nan)
        trace.steps.append(np.nan)
        return
    # an over-relaxed iterate is not the subproblem optimum
    trace.objectives.append(sol.objective_value if step == 1.0 else design.total_power)
    ratios = [eig_ratio(V) for V in design.V_dl]
    trace.rank_ratios.append(max(ratios) if ratios else 0.0)
    trace.steps.append(step)
    trace.iterations_used += 1


def _scaled(d: RelaxedDesign, scale: float) -> RelaxedDesign:
    return RelaxedDesign(V_dl=scale * d.V_dl, V0=scale * d.V0, p_ul=scale * d.p_ul)


def overrelax(base: RelaxedDesign, target: RelaxedDesign, step: float, ch: ChannelSet,
              cfg: SystemConfig, sensing: bool = True) -> Tuple[Optional[RelaxedDesign], float]:
    """ moves past an SCA step, to base + step * (target - base).

    the step shrinks towards 1 until the point meets every true (not
    linearized) SINR constraint and costs less than target; a slight
    uniform scale-up, which raises every SINR, absorbs solver noise on
    active constraints. a feasible point keeps the next subproblem feasible
    at its own objective, so the objective sequence stays monotone.
    returns (None, 1.0) when no step above 1 qualifies.
    """
    limit = target.total_power
    while step > 1.1:
        V_dl = np.stack([clip_psd(b + step * (t - b)) for b, t in zip(base.V_dl, target.V_dl)]) \
            if target.V_dl.shape[0] else target.V_dl
        V0 = clip_psd(base.V0 + step * (target.V0 - base.V0))
        p_ul = np.maximum(base.p_ul + step * (target.p_ul - base.p_ul), 0.0)
        stepped = RelaxedDesign(V_dl=V_dl, V0=V0, p_ul=p_ul)
        for scale in FEASIBILITY_SCALES:
            candidate = _scaled(stepped, scale)
            if candidate.total_power >= limit:
                break
            slacks = constraint_slacks(relaxed_sinrs(candidate, ch), cfg, sensing)
            if min(slacks.values()) >= 0:
                return candidate, step
        step = 1.0 + (step - 1.0) / 2
    return None, 1.0


def _solve(problem: ConicProblem, settings: ScaSettings, dump_dir, name: str) -> ConicSolution:
    if dump_dir is not None:
        fi.conic.dump_problem(problem, Path(dump_dir) / f'{name}.txt')
    return fi.conic.solve(problem, tol=settings.conic_tol, solver=settings.solver)


def run_sca(ch: ChannelSet, cfg: SystemConfig, settings: ScaSettings = None,
            sensing: bool = True, radar_covariance: bool = True,
            dump_dir=None) -> Tuple[RelaxedDesign, SolverTrace]:
    """ runs the SCA loop from a scaled-up feasible start until the
    relative objective change drops below settings.rel_obj_tol. steps
    are over-relaxed (see `overrelax`) while that keeps the iterate
    feasible, doubling the factor after each accepted step up to
    settings.max_overrelax and falling back to 2 after a rejection.

    raises InfeasibleStartError when no start power makes the first
    subproblem feasible, SubproblemFailureError when a later subproblem
    fails. hitting max_iters is reported through the trace.
    """
    settings = settings or ScaSettings()
    trace = SolverTrace()
    logging.info(f'SCA on N_t={ch.n_tx} N_r={ch.n_rx} L={ch.n_dl} K={ch.n_ul}, '
                 f'subproblem complexity order {subproblem_complexity(ch.n_tx, ch.n_dl, ch.n_ul):.3g}')

    def subproblem(prev):
        return build_subproblem(prev, ch, cfg, sensing=sensing, radar_covariance=radar_covariance,
                                max_power_mw=settings.max_power_mw)

    # feasible start
    sol = None
    for attempt in range(settings.max_init_attempts):
        power = settings.init_power_mw * settings.init_growth ** attempt
        start = initial_design(ch, power, radar_covariance=radar_covariance)
        problem = subproblem(start)
        sol = _solve(problem, settings, dump_dir, f'init-{attempt:02d}')
        if sol.ok:
            trace.init_power_mw = power
            break
        logging.info(f'first subproblem {sol.status} from {lin2db(power):.1f} dBm start')
    if sol is None or not sol.ok:
        trace.termination = INFEASIBLE_INIT
        raise InfeasibleStartError(f'no feasible start within {settings.max_init_attempts} attempts '
                                   f'(up to {lin2db(power):.1f} dBm)', trace)

    design = design_from_solution(sol, ch, radar_covariance)
    _record(trace, sol, design)
    step = min(2.0, settings.max_overrelax)
    # without linearized constraints the first subproblem is already exact
    if not problem.hyperbolic_constraints:
        trace.termination = CONVERGED

    while trace.termination is None:
        if trace.iterations_used >= settings.max_iters:
            trace.termination = MAX_ITERS
            logging.warning(f'SCA stopped after {settings.max_iters} iterations without converging')
            break

        sol = _solve(subproblem(design), settings, dump_dir, f'iter-{trace.iterations_used + 1:03d}')
        if not sol.ok:
            _record(trace, sol)
            trace.termination = SUBPROBLEM_FAILURE
            raise SubproblemFailureError(
                f'subproblem {trace.iterations_used + 1} returned {sol.status}', trace)

        target = design_from_solution(sol, ch, radar_covariance)
        previous = trace.objectives[-1]
        current = sol.objective_value
        change = abs(previous - current) / previous if previous > 0 else abs(current)
        if change < settings.rel_obj_tol or current > previous or settings.max_overrelax == 1:
            design, used = target, 1.0
        else:
            stepped, used = overrelax(design, target, step, ch, cfg, sensing)
            design = target if stepped is None else stepped
        step = min(2.0 * used, settings.max_overrelax) if used > 1 else min(2.0, settings.max_overrelax)

        _record(trace, sol, design, step=used)
        logging.debug(f'iteration {trace.iterations_used}: {trace.objectives[-1]:.6e} mW, '
                      f'change {change:.2e}, step {used:.3g}')
        if change < settings.rel_obj_tol:
            trace.termination = CONVERGED
            break

    trace.final_sinrs = relaxed_sinrs(design, ch)
    slacks = constraint_slacks(trace.final_sinrs, cfg, sensing)
    trace.feasible = all(s >= -settings.feas_tol_db for s in slacks.values())
    if not trace.feasible:
        logging.warning(f'relaxed design violates a constraint: {slacks}')
    logging.info(f'SCA {trace.termination} after {trace.iterations_used} iterations, '
                 f'{lin2db(trace.objectives[-1]):.2f} dBm')
    return design, trace


def extract_rank_one(hat: RelaxedDesign, ch: ChannelSet, cfg: SystemConfig = None) -> TransmitDesign:
    """ rank-one beamformers v_l = V_l g_l / sqrt(g_l^H V_l g_l), with the
    remainder of each V_l moved into the radar covariance. total power,
    the transmit covariance and every g_l^H V_l g_l are preserved.

    users whose downlink constraint is switched off in cfg get a zero
    beamformer when their relaxed matrix carries no power towards them.
    """
    n_tx = ch.n_tx
    v_dl = np.zeros((ch.n_dl, n_tx), dtype=complex)
    V0 = np.array(hat.V0, dtype=complex)
    dl_disabled = np.zeros(ch.n_dl, dtype=bool) if cfg is None else cfg.dl_thresholds <= 0

    for l in range(ch.n_dl):
        V = hat.V_dl[l]
        g = ch.g_dl[l]
        gain = float(np.real(g.conj() @ V @ g))
        trace = float(np.real(np.trace(V)))
        if gain <= 1e-12 * trace or gain <= 0:
            if not dl_disabled[l]:
                raise DegenerateSolutionError(
                    f'downlink user {l + 1}: g^H V g = {gain:.3e} with Tr(V) = {trace:.3e}')
            V0 = V0 + V
            continue
        v = V @ g / np.sqrt(gain)
        v_dl[l] = v
        V0 = V0 + V - outer(v)

    return TransmitDesign(v_dl=v_dl, V0=hermitian(V0), p_ul=np.array(hat.p_ul, dtype=float))


def solve_joint(ch: ChannelSet, cfg: SystemConfig, settings: ScaSettings = None,
                sensing: bool = True, radar_covariance: bool = True,
                dump_dir=None) -> Tuple[TransmitDesign, ReceiveDesign, SolverTrace]:
    """ SCA, rank-one extraction, then the closed-form receivers """
    settings = settings or ScaSettings()
    hat, trace = run_sca(ch, cfg, settings, sensing=sensing,
                         radar_covariance=radar_covariance, dump_dir=dump_dir)
    design = extract_rank_one(hat, ch, cfg)
    receivers = optimal_receivers(design, ch)

    trace.final_sinrs = sinr_report(design, receivers, ch)
    trace.slacks_db = constraint_slacks(trace.final_sinrs, cfg, sensing)
    trace.feasible = all(s >= -settings.feas_tol_db for s in trace.slacks_db.values())
    if not trace.feasible:
        worst = min(trace.slacks_db, key=trace.slacks_db.get)
        logging.warning(f'extracted design misses {worst} by {-trace.slacks_db[worst]:.3f} dB')
    return design, receivers, trace
