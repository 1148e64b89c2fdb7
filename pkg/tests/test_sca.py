import fd_isac as fi
from fd_isac.receivers import build_whitening
from fd_isac.sca import (CONVERGED, INFEASIBLE_INIT, DegenerateSolutionError, InfeasibleStartError,
                         ScaSettings, SolverTrace, build_subproblem, constraint_slacks,
                         extract_rank_one, initial_design, linearize_radar, linearize_uplink,
                         overrelax, run_sca, solve_joint, subproblem_complexity)
from fd_isac.scenario import ConfigError, SystemConfig, realize_channels
from fd_isac.signal_metrics import RelaxedDesign, SinrReport, covariance_q, downlink_sinr
from fd_isac.utils.linalg import cn, hermitian, outer, solve_pd

import numpy as np
import pytest


def _random_pd(rng, n, floor=0.1):
    F = cn(rng, (n, n))
    return hermitian(F @ F.conj().T) + floor * np.eye(n)


"""
linearized bounds
"""


def test_bound_is_tight_at_expansion_point(rng):
    a = cn(rng, 6)
    psi_prev = _random_pd(rng, 6)
    bound = linearize_radar(psi_prev, a)
    true = np.real(a.conj() @ solve_pd(psi_prev, a))
    assert bound(psi_prev) == pytest.approx(true, rel=1e-12)


def test_bound_hand_evaluation(rng):
    a = cn(rng, 4)
    bound = linearize_uplink(np.eye(4), a)
    assert bound(2 * np.eye(4)) == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.norm(a) ** 2 / 2 >= bound(2 * np.eye(4))


def test_bound_never_exceeds_true_value(rng):
    for _ in range(1000):
        a = cn(rng, 5)
        psi_prev, psi = _random_pd(rng, 5), _random_pd(rng, 5)
        true = np.real(a.conj() @ solve_pd(psi, a))
        assert (linearize_radar(psi_prev, a)(psi) - true) / true <= 1e-9


def test_bound_rejects_singular_expansion_point():
    with pytest.raises(ValueError):
        linearize_radar(np.zeros((3, 3)), np.ones(3))


"""
settings and bookkeeping
"""


def test_settings():
    assert ScaSettings.from_entry(None) == ScaSettings()
    settings = ScaSettings.from_entry({'max_iters': 10, 'rel_obj_tol': '1e-3'})
    assert settings.max_iters == 10
    assert settings.rel_obj_tol == 1e-3
    with pytest.raises(ConfigError, match='max_itres'):
        ScaSettings.from_entry({'max_itres': 10})
    with pytest.raises(ConfigError, match='init_growth'):
        ScaSettings(init_growth=1.0)
    with pytest.raises(ConfigError, match='max_overrelax'):
        ScaSettings(max_overrelax=0.5)


def test_initial_design_power_split(channels):
    start = initial_design(channels, 4.0)
    assert start.transmit_power == pytest.approx(4.0)
    np.testing.assert_allclose(start.p_ul, 4.0 / 3)
    np.testing.assert_allclose(start.V0, 1.0 / 8 * np.eye(8))
    g = channels.g_dl[1]
    np.testing.assert_allclose(start.V_dl[1], outer(g) / np.linalg.norm(g) ** 2)


def test_subproblem_constraints(channels, cfg):
    problem = build_subproblem(initial_design(channels, 1.0), channels, cfg, max_power_mw=1e6)
    assert [c.label for c in problem.hyperbolic_constraints] == ['radar', 'ul_1', 'ul_2', 'ul_3']
    assert [c.label for c in problem.linear_constraints] == ['dl_1', 'dl_2', 'dl_3', 'power_cap']
    assert [name for name, _ in problem.psd_vars] == ['V0', 'V1', 'V2', 'V3']
    assert problem.scalar_vars == ['p1', 'p2', 'p3']
    problem.validate()

    disabled = SystemConfig(radar_sinr_db=-np.inf, ul_sinr_db=(5.0, -np.inf, 5.0))
    problem = build_subproblem(initial_design(channels, 1.0), channels, disabled, radar_covariance=False)
    assert [c.label for c in problem.hyperbolic_constraints] == ['ul_1', 'ul_3']
    assert [name for name, _ in problem.psd_vars] == ['V1', 'V2', 'V3']


def test_subproblem_radar_row_matches_bound(channels, cfg, design):
    # the x * y >= c row evaluated at prev reproduces the linearized SINR
    prev = design.to_relaxed()
    problem = build_subproblem(prev, channels, cfg)
    radar = problem.hyperbolic_constraints[0]
    values = {'V0': prev.V0, **{f'V{l + 1}': prev.V_dl[l] for l in range(3)}}
    scalars = {f'p{k + 1}': prev.p_ul[k] for k in range(3)}
    psi = build_whitening(prev, channels).psi
    x = radar.x.evaluate(values, scalars)
    assert x == pytest.approx(np.real(channels.a_r0.conj() @ solve_pd(psi, channels.a_r0)), rel=1e-8)
    Q = covariance_q(prev)
    assert radar.y.evaluate(values, scalars) == pytest.approx(np.real(channels.a_t0.conj() @ Q @ channels.a_t0))


def test_constraint_slacks():
    cfg = SystemConfig(n_ul_users=1, n_dl_users=1, radar_sinr_db=-np.inf, ul_sinr_db=0.0, dl_sinr_db=10.0)
    report = SinrReport(radar=0.0, uplink=np.array([1.0]), downlink=np.array([100.0]))
    slacks = constraint_slacks(report, cfg)
    assert slacks['radar'] == np.inf
    assert slacks['ul_1'] == pytest.approx(0.0)
    assert slacks['dl_1'] == pytest.approx(10.0)
    assert constraint_slacks(report, SystemConfig(n_ul_users=1, n_dl_users=1), sensing=False)['radar'] == np.inf


def test_subproblem_complexity():
    assert subproblem_complexity(8, 3, 3) == pytest.approx(8 ** 6.5 * 3 ** 3.5 + 8 ** 4 * 9 * 3 ** 1.5)


def test_trace_frame():
    trace = SolverTrace(objectives=[2.0, 1.0], statuses=['optimal'] * 2, residuals=[0.0, 0.0],
                        rank_ratios=[0.1, 0.0], steps=[1.0, 2.0], termination=CONVERGED)
    frame = trace.to_frame()
    assert list(frame.columns) == ['iteration', 'objective_mw', 'status', 'max_residual', 'rank_ratio',
                                   'step']
    assert list(frame.iteration) == [1, 2]
    assert trace.converged


def _scaled(d, scale):
    return RelaxedDesign(V_dl=scale * d.V_dl, V0=scale * d.V0, p_ul=scale * d.p_ul)


def test_overrelax_extends_a_feasible_step(channels, design):
    unconstrained = SystemConfig(radar_sinr_db=-np.inf, ul_sinr_db=-np.inf, dl_sinr_db=-np.inf)
    point = design.to_relaxed()
    stepped, step = overrelax(_scaled(point, 2.0), _scaled(point, 1.5), 2.0, channels, unconstrained)
    assert step == 2.0
    assert stepped.total_power == pytest.approx(point.total_power, rel=1e-10)
    np.testing.assert_allclose(stepped.V0, point.V0, atol=1e-10 * np.abs(point.V0).max())
    np.testing.assert_allclose(stepped.p_ul, point.p_ul, rtol=1e-12)


def test_overrelax_rejects_costlier_or_infeasible_points(channels, cfg, design):
    point = design.to_relaxed()
    unconstrained = SystemConfig(radar_sinr_db=-np.inf, ul_sinr_db=-np.inf, dl_sinr_db=-np.inf)
    # an ascent direction never gets cheaper
    assert overrelax(point, _scaled(point, 1.5), 4.0, channels, unconstrained) == (None, 1.0)
    # a picowatt design misses the default thresholds
    tiny = _scaled(point, 1e-9)
    assert overrelax(tiny, _scaled(tiny, 0.9), 4.0, channels, cfg) == (None, 1.0)


"""
rank-one extraction
"""


def test_extraction_is_idempotent_on_rank_one(channels, design):
    d = extract_rank_one(design.to_relaxed(), channels)
    for l in range(3):
        phase = np.vdot(d.v_dl[l], design.v_dl[l])
        np.testing.assert_allclose(d.v_dl[l] * phase / abs(phase), design.v_dl[l], atol=1e-12)
    np.testing.assert_allclose(d.V0, design.V0, atol=1e-14)


def test_extraction_preserves_power_and_gains(channels, rng):
    hat = RelaxedDesign(V_dl=np.stack([_random_pd(rng, 8, floor=0.0) for _ in range(3)]),
                        V0=_random_pd(rng, 8, floor=0.0), p_ul=rng.uniform(size=3))
    d = extract_rank_one(hat, channels)
    assert d.total_power == pytest.approx(hat.total_power, rel=1e-10)
    np.testing.assert_allclose(covariance_q(d), covariance_q(hat), rtol=1e-10, atol=1e-14)
    for l in range(3):
        g = channels.g_dl[l]
        assert abs(np.vdot(g, d.v_dl[l])) ** 2 == pytest.approx(np.real(g.conj() @ hat.V_dl[l] @ g), rel=1e-10)
    # interference at each user is unchanged, so the downlink SINRs cannot drop
    assert np.all(downlink_sinr(d, channels) >= downlink_sinr(hat, channels) * (1 - 1e-9))
    assert np.linalg.eigvalsh(d.V0).min() >= -1e-9 * np.real(np.trace(d.V0))


def test_extraction_degenerate_beam(channels):
    g = channels.g_dl[0]
    w = np.zeros(8, dtype=complex)
    w[:2] = [g[1].conj(), -g[0].conj()]
    V_dl = np.zeros((3, 8, 8), dtype=complex)
    V_dl[0] = outer(w)
    for l in (1, 2):
        V_dl[l] = outer(channels.g_dl[l])
    hat = RelaxedDesign(V_dl=V_dl, V0=np.zeros((8, 8)), p_ul=np.zeros(3))
    with pytest.raises(DegenerateSolutionError):
        extract_rank_one(hat, channels)

    cfg = SystemConfig(dl_sinr_db=(-np.inf, 8.0, 8.0))
    d = extract_rank_one(hat, channels, cfg)
    np.testing.assert_array_equal(d.v_dl[0], 0)
    assert d.total_power == pytest.approx(hat.total_power)


"""
end to end
"""


@pytest.fixture(scope='module')
def default_solution():
    cfg = SystemConfig()
    ch = realize_channels(cfg)
    return (cfg, ch) + solve_joint(ch, cfg)


def _single_user_cfg():
    return SystemConfig(n_ul_users=0, n_dl_users=1, ul_sinr_db=(), radar_sinr_db=-np.inf)


@pytest.mark.slow
def test_single_user_hand_solution(tmp_path):
    cfg = _single_user_cfg()
    ch = realize_channels(cfg)
    design, receivers, trace = solve_joint(ch, cfg, dump_dir=tmp_path)
    g = ch.g_dl[0]
    expected = cfg.noise_dl[0] * cfg.dl_thresholds[0] / np.linalg.norm(g) ** 2
    assert design.total_power == pytest.approx(expected, rel=1e-6)
    assert trace.converged and trace.feasible
    assert (tmp_path / 'init-00.txt').exists()
    # a convex problem needs no further iterations
    assert trace.iterations_used == 1


@pytest.mark.slow
def test_trivial_thresholds_give_zero_power():
    cfg = SystemConfig(radar_sinr_db=-np.inf, ul_sinr_db=-np.inf, dl_sinr_db=-np.inf)
    ch = realize_channels(cfg)
    design, receivers, trace = solve_joint(ch, cfg)
    assert design.total_power == pytest.approx(0.0, abs=1e-8)
    assert trace.converged and trace.feasible


@pytest.mark.slow
def test_default_scenario(default_solution):
    cfg, ch, design, receivers, trace = default_solution
    assert trace.termination == CONVERGED
    assert trace.iterations_used <= 50
    assert set(trace.statuses) == {'optimal'}
    objectives = np.asarray(trace.objectives)
    assert np.all(np.diff(objectives) <= 1e-7 * objectives[:-1])
    assert len(trace.slacks_db) == 7
    assert all(s >= -0.01 for s in trace.slacks_db.values())
    assert design.total_power == pytest.approx(objectives[-1], rel=1e-6)


@pytest.fixture(scope='module')
def default_relaxed():
    cfg, settings = SystemConfig(), ScaSettings()
    ch = realize_channels(cfg)
    return (cfg, ch, settings) + run_sca(ch, cfg, settings)


@pytest.mark.slow
def test_final_iterate_is_a_fixed_point(default_relaxed):
    cfg, ch, settings, hat, trace = default_relaxed
    assert trace.converged
    sol = fi.conic.solve(build_subproblem(hat, ch, cfg, max_power_mw=settings.max_power_mw),
                         tol=settings.conic_tol)
    assert sol.ok
    final = trace.objectives[-1]
    assert abs(sol.objective_value - final) / final < settings.rel_obj_tol


@pytest.mark.slow
def test_converges_on_most_seeds():
    cfg = SystemConfig()
    n_converged = 0
    for seed in range(fi.SEED, fi.SEED + 20):
        _, trace = run_sca(realize_channels(cfg, seed=seed), cfg)
        objectives = np.asarray(trace.objectives)
        assert np.all(np.diff(objectives) <= 1e-7 * objectives[:-1]), seed
        assert trace.iterations_used <= 50
        n_converged += trace.converged
    assert n_converged >= 19


@pytest.mark.slow
def test_more_antennas_need_less_power(default_solution):
    cfg, _, design, _, _ = default_solution
    larger = cfg.with_antennas(12)
    big, _, trace = solve_joint(realize_channels(larger), larger)
    assert trace.converged
    assert big.total_power < design.total_power


@pytest.mark.slow
def test_unsatisfiable_threshold():
    cfg = SystemConfig(dl_sinr_db=200.0)
    with pytest.raises(InfeasibleStartError) as e:
        run_sca(realize_channels(cfg), cfg, ScaSettings(max_init_attempts=3))
    assert e.value.trace.termination == INFEASIBLE_INIT
