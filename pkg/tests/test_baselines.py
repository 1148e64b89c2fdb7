from fd_isac.baselines import (COMM_ONLY, FD_PROPOSED, HD_MODE, RATE_MATCHED, BaselineResult,
                               hd_slot_configs, rate_matched_threshold_db, solve_comm_only,
                               solve_fd_proposed, solve_hd_mode, solve_scheme)
from fd_isac.sca import SolverTrace
from fd_isac.scenario import ConfigError, SystemConfig, realize_channels

import numpy as np
import pytest


def test_rate_matched_threshold():
    assert rate_matched_threshold_db(0.0) == pytest.approx(10 * np.log10(3))
    np.testing.assert_allclose(rate_matched_threshold_db([0.0, 10.0]),
                               10 * np.log10([3.0, 120.0]))
    assert rate_matched_threshold_db(-np.inf) == -np.inf


def test_hd_slot_configs(cfg):
    slot_a, slot_b = hd_slot_configs(cfg)
    assert slot_a.n_ul_users == 0 and slot_a.n_dl_users == 3
    assert slot_b.n_ul_users == 3 and slot_b.n_dl_users == 0
    assert slot_a.radar_sinr_db == slot_b.radar_sinr_db == cfg.radar_sinr_db
    assert slot_a.dl_sinr_db == cfg.dl_sinr_db

    slot_a, slot_b = hd_slot_configs(cfg, RATE_MATCHED)
    assert slot_a.dl_sinr_db[0] == pytest.approx(rate_matched_threshold_db(8.0))
    assert slot_b.ul_sinr_db[0] == pytest.approx(rate_matched_threshold_db(5.0))

    with pytest.raises(ConfigError, match='hd_thresholds'):
        hd_slot_configs(cfg, 'halved')


def test_unknown_scheme(cfg, channels):
    with pytest.raises(ConfigError, match='schemes'):
        solve_scheme('oracle', channels, cfg)


def test_result_rejects_negative_power():
    with pytest.raises(AssertionError):
        BaselineResult(scheme=FD_PROPOSED, total_power_mw=-1.0, per_slot_power_mw=[-1.0],
                       trace=SolverTrace())


@pytest.fixture(scope='module')
def default_results():
    cfg = SystemConfig()
    ch = realize_channels(cfg)
    return {scheme: solve_scheme(scheme, ch, cfg, hd_thresholds=RATE_MATCHED)
            for scheme in (FD_PROPOSED, HD_MODE, COMM_ONLY)}


@pytest.mark.slow
def test_default_ordering(default_results):
    for result in default_results.values():
        assert result.converged
    fd = default_results[FD_PROPOSED].total_power_dbm
    hd = default_results[HD_MODE].total_power_dbm
    comm = default_results[COMM_ONLY].total_power_dbm
    assert fd <= hd + 0.1
    assert comm <= fd + 0.1


@pytest.mark.slow
def test_hd_result_layout(default_results):
    hd = default_results[HD_MODE]
    assert len(hd.per_slot_power_mw) == 2
    assert len(hd.slot_traces) == 2
    assert hd.total_power_mw == pytest.approx(np.mean(hd.per_slot_power_mw))
    assert {'A.radar', 'A.dl_1', 'B.radar', 'B.ul_1'} <= set(hd.trace.slacks_db)
    design_a, _ = hd.designs[0]
    design_b, _ = hd.designs[1]
    assert design_a.p_ul.size == 0
    assert design_b.v_dl.shape[0] == 0


@pytest.mark.slow
def test_comm_only_ignores_radar_threshold(cfg, channels):
    low = solve_comm_only(channels, cfg.with_radar_threshold(0.0))
    high = solve_comm_only(channels, cfg.with_radar_threshold(12.0))
    assert low.total_power_mw == pytest.approx(high.total_power_mw, rel=1e-9)


@pytest.mark.slow
def test_comm_only_single_user():
    cfg = SystemConfig(n_ul_users=0, n_dl_users=1, ul_sinr_db=())
    ch = realize_channels(cfg)
    result = solve_comm_only(ch, cfg)
    expected = cfg.noise_dl[0] * cfg.dl_thresholds[0] / np.linalg.norm(ch.g_dl[0]) ** 2
    assert result.total_power_mw == pytest.approx(expected, rel=1e-6)


@pytest.mark.slow
def test_trivial_thresholds_give_zero_power():
    cfg = SystemConfig(radar_sinr_db=-np.inf, ul_sinr_db=-np.inf, dl_sinr_db=-np.inf)
    ch = realize_channels(cfg)
    for scheme in (FD_PROPOSED, HD_MODE, COMM_ONLY):
        assert solve_scheme(scheme, ch, cfg).total_power_mw == pytest.approx(0.0, abs=1e-8)


@pytest.mark.slow
def test_hd_without_sensing(cfg, channels):
    cfg = cfg.with_radar_threshold(-np.inf)
    hd = solve_hd_mode(channels, cfg)
    design_b, _ = hd.designs[1]
    assert design_b.transmit_power <= 1e-4 * hd.total_power_mw
    fd = solve_fd_proposed(channels, cfg)
    assert fd.converged


@pytest.mark.slow
def test_hd_power_grows_with_radar_threshold(cfg, channels):
    powers = []
    for threshold_db in (0.0, 6.0, 12.0):
        result = solve_hd_mode(channels, cfg.with_radar_threshold(threshold_db))
        assert result.converged
        powers.append(result.total_power_mw)
    assert np.all(np.diff(powers) >= -1e-3 * np.asarray(powers[:-1]))
    assert powers[-1] > powers[0]
