"""baselines.py - full-duplex, communication-only and half-duplex schemes"""
from fd_isac.receivers import ReceiveDesign
from fd_isac.scenario import ChannelSet, ConfigError, SystemConfig
from fd_isac.sca import CONVERGED, ScaSettings, SolverTrace, solve_joint
from fd_isac.signal_metrics import TransmitDesign
from fd_isac.utils.linalg import db2lin, lin2db

from dataclasses import dataclass, field, replace
from typing import List, Tuple
import logging

import numpy as np

FD_PROPOSED = 'fd_proposed'
HD_MODE = 'hd_mode'
COMM_ONLY = 'comm_only'
SCHEMES = (FD_PROPOSED, HD_MODE, COMM_ONLY)

# HD slot threshold conventions
IDENTICAL = 'identical'
RATE_MATCHED = 'rate_matched'
HD_THRESHOLDS = (IDENTICAL, RATE_MATCHED)


@dataclass
class BaselineResult:
    """ one scheme's answer. for the two-slot HD scheme `trace` merges the
    slot traces (kept individually in `slot_traces`) and `designs` holds
    one (transmit, receive) pair per slot.
    """
    scheme: str
    total_power_mw: float
    per_slot_power_mw: List[float]
    trace: SolverTrace
    slot_traces: List[SolverTrace] = field(default_factory=list)
    designs: List[Tuple[TransmitDesign, ReceiveDesign]] = field(default_factory=list)

    def __post_init__(self):
        assert self.total_power_mw >= 0, f'negative power {self.total_power_mw}'

    @property
    def converged(self) -> bool:
        return self.trace.termination == CONVERGED and self.trace.feasible

    @property
    def total_power_dbm(self) -> float:
        return float(lin2db(self.total_power_mw))


def _single_slot(scheme: str, ch: ChannelSet, cfg: SystemConfig, settings: ScaSettings,
                 **kwargs) -> BaselineResult:
    design, receivers, trace = solve_joint(ch, cfg, settings, **kwargs)
    power = design.total_power
    return BaselineResult(scheme=scheme, total_power_mw=power, per_slot_power_mw=[power],
                          trace=trace, slot_traces=[trace], designs=[(design, receivers)])


def solve_fd_proposed(ch: ChannelSet, cfg: SystemConfig, settings: ScaSettings = None) -> BaselineResult:
    return _single_slot(FD_PROPOSED, ch, cfg, settings)


def solve_comm_only(ch: ChannelSet, cfg: SystemConfig, settings: ScaSettings = None) -> BaselineResult:
    """ same pipeline without the radar constraint and without a dedicated
    radar covariance, so the result does not depend on the radar threshold
    """
    return _single_slot(COMM_ONLY, ch, cfg, settings, sensing=False, radar_covariance=False)


def rate_matched_threshold_db(threshold_db):
    """ per-slot SINR giving the full-duplex rate in half the time,
    (1 + tau)^2 - 1
    """
    tau = db2lin(threshold_db)
    return lin2db((1 + tau) ** 2 - 1)


def hd_slot_configs(cfg: SystemConfig, thresholds: str = IDENTICAL) -> Tuple[SystemConfig, SystemConfig]:
    """ (downlink + sensing slot, uplink + sensing slot) configurations """
    if thresholds not in HD_THRESHOLDS:
        raise ConfigError(f'unknown HD threshold convention {thresholds!r}, '
                          f'expected one of {HD_THRESHOLDS}', 'hd_thresholds')
    slot_a = cfg.without_uplink()
    slot_b = cfg.without_downlink()
    if thresholds == RATE_MATCHED:
        slot_a = replace(slot_a, dl_sinr_db=tuple(float(x) for x in rate_matched_threshold_db(slot_a.dl_sinr_db)))
        slot_b = replace(slot_b, ul_sinr_db=tuple(float(x) for x in rate_matched_threshold_db(slot_b.ul_sinr_db)))
    return slot_a, slot_b


def _merge_traces(traces: List[SolverTrace]) -> SolverTrace:
    merged = SolverTrace()
    failed = [t.termination for t in traces if t.termination != CONVERGED]
    merged.termination = failed[0] if failed else CONVERGED
    merged.iterations_used = sum(t.iterations_used for t in traces)
    merged.feasible = all(t.feasible for t in traces)
    merged.init_power_mw = max(t.init_power_mw for t in traces)
    for slot, t in zip('AB', traces):
        merged.slacks_db.update({f'{slot}.{k}': v for k, v in t.slacks_db.items()})
    return merged


def solve_hd_mode(ch: ChannelSet, cfg: SystemConfig, settings: ScaSettings = None,
                  thresholds: str = IDENTICAL) -> BaselineResult:
    """ two half-length slots with sensing in both: downlink + radar, then
    a pure radar covariance while the uplink users transmit. the reported
    power is the average of the two slot powers.
    """
    cfg_a, cfg_b = hd_slot_configs(cfg, thresholds)

    design_a, receivers_a, trace_a = solve_joint(ch.without_uplink(), cfg_a, settings)
    design_b, receivers_b, trace_b = solve_joint(ch.without_downlink(), cfg_b, settings)

    slot_powers = [design_a.total_power, design_b.total_power]
    logging.info(f'HD slots: {lin2db(slot_powers[0]):.2f} dBm / {lin2db(slot_powers[1]):.2f} dBm')
    return BaselineResult(scheme=HD_MODE, total_power_mw=float(np.mean(slot_powers)),
                          per_slot_power_mw=slot_powers,
                          trace=_merge_traces([trace_a, trace_b]),
                          slot_traces=[trace_a, trace_b],
                          designs=[(design_a, receivers_a), (design_b, receivers_b)])


def solve_scheme(scheme: str, ch: ChannelSet, cfg: SystemConfig, settings: ScaSettings = None,
                 hd_thresholds: str = IDENTICAL) -> BaselineResult:
    if scheme == FD_PROPOSED:
        return solve_fd_proposed(ch, cfg, settings)
    if scheme == COMM_ONLY:
        return solve_comm_only(ch, cfg, settings)
    if scheme == HD_MODE:
        return solve_hd_mode(ch, cfg, settings, thresholds=hd_thresholds)
    raise ConfigError(f'unknown scheme {scheme!r}, expected one of {SCHEMES}', 'schemes')
