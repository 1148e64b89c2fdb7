"""signal_metrics.py - covariances, SINRs and beampattern gain"""
import fd_isac as fi
from fd_isac.scenario import ChannelSet, make_steering
from fd_isac.utils.linalg import cn, hermitian, is_psd, lin2db, psd_factor

from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd


def _check_design(V0: np.ndarray, p_ul: np.ndarray, scale: float, V_dl: np.ndarray = ()):
    """ PSD covariances (eigenvalues down to -PSD_TOL times the transmit
    power) and nonnegative uplink powers
    """
    if not is_psd(V0, scale):
        raise ValueError('V0 is not positive semidefinite')
    for l, V in enumerate(V_dl):
        if not is_psd(V, scale):
            raise ValueError(f'V_dl[{l}] is not positive semidefinite')
    if np.any(np.asarray(p_ul) < 0):
        raise ValueError(f'uplink powers must be nonnegative, got {p_ul}')


@dataclass(frozen=True, eq=False)
class TransmitDesign:
    """ rank-one downlink beamformers (one row of v_dl per user),
    dedicated radar covariance V0 and uplink powers in mW.
    """
    v_dl: np.ndarray
    V0: np.ndarray
    p_ul: np.ndarray

    def __post_init__(self):
        _check_design(self.V0, self.p_ul, self.transmit_power)

    @classmethod
    def zeros(cls, n_tx: int, n_dl: int, n_ul: int) -> 'TransmitDesign':
        return cls(v_dl=np.zeros((n_dl, n_tx), dtype=complex),
                   V0=np.zeros((n_tx, n_tx), dtype=complex),
                   p_ul=np.zeros(n_ul))

    @property
    def n_tx(self) -> int:
        return self.V0.shape[0]

    @property
    def dl_matrices(self) -> np.ndarray:
        """ (L, N_t, N_t) stack of v_l v_l^H """
        return np.einsum('li,lj->lij', self.v_dl, self.v_dl.conj())

    @property
    def transmit_power(self) -> float:
        return float(np.sum(np.abs(self.v_dl) ** 2) + np.real(np.trace(self.V0)))

    @property
    def total_power(self) -> float:
        """ BS transmit power plus uplink powers, mW """
        return self.transmit_power + float(np.sum(self.p_ul))

    def to_relaxed(self) -> 'RelaxedDesign':
        return RelaxedDesign(V_dl=self.dl_matrices, V0=self.V0, p_ul=self.p_ul)


@dataclass(frozen=True, eq=False)
class RelaxedDesign:
    """ semidefinite-relaxed design, V_dl is an (L, N_t, N_t) stack """
    V_dl: np.ndarray
    V0: np.ndarray
    p_ul: np.ndarray

    def __post_init__(self):
        _check_design(self.V0, self.p_ul, self.transmit_power, self.V_dl)

    @classmethod
    def zeros(cls, n_tx: int, n_dl: int, n_ul: int) -> 'RelaxedDesign':
        return cls(V_dl=np.zeros((n_dl, n_tx, n_tx), dtype=complex),
                   V0=np.zeros((n_tx, n_tx), dtype=complex),
                   p_ul=np.zeros(n_ul))

    @property
    def n_tx(self) -> int:
        return self.V0.shape[0]

    @property
    def transmit_power(self) -> float:
        return float(np.real(np.trace(self.V0)) + np.sum(np.real(np.einsum('lii->l', self.V_dl))))

    @property
    def total_power(self) -> float:
        return self.transmit_power + float(np.sum(self.p_ul))


Design = Union[TransmitDesign, RelaxedDesign]


@dataclass(frozen=True, eq=False)
class SinrReport:
    """ linear SINRs: radar, one per uplink user, one per downlink user """
    radar: float
    uplink: np.ndarray = field(default_factory=lambda: np.zeros(0))
    downlink: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_record(self) -> dict:
        record = {'radar': self.radar, 'radar_db': float(lin2db(self.radar))}
        for k, value in enumerate(self.uplink):
            record[f'ul_{k + 1}'] = float(value)
            record[f'ul_{k + 1}_db'] = float(lin2db(value))
        for l, value in enumerate(self.downlink):
            record[f'dl_{l + 1}'] = float(value)
            record[f'dl_{l + 1}_db'] = float(lin2db(value))
        return record


def covariance_q(d: Design) -> np.ndarray:
    """ transmit covariance sum_l v_l v_l^H + V0 (or sum_l V_l + V0) """
    if isinstance(d, TransmitDesign):
        dl = d.v_dl.T @ d.v_dl.conj()
    else:
        dl = np.sum(d.V_dl, axis=0) if d.V_dl.shape[0] else 0
    return hermitian(dl + d.V0)


def interference_matrices(ch: ChannelSet):
    """ returns (B, C): B = sum_i beta_i A_i + H_SI, C = B + beta_0 A_0 """
    B = np.tensordot(ch.interferer_amps, ch.interferer_matrices, axes=1) + ch.h_si
    C = B + ch.target_amp * ch.A0
    return B, C


def uplink_covariance(p_ul: np.ndarray, h_ul: np.ndarray, exclude: int = None) -> np.ndarray:
    """ sum_k p_k h_k h_k^H, optionally leaving out user `exclude` """
    weights = np.asarray(p_ul, dtype=float).copy()
    if exclude is not None:
        weights[exclude] = 0.0
    return (h_ul.T * weights) @ h_ul.conj()


def radar_interference_covariance(d: Design, ch: ChannelSet) -> np.ndarray:
    """ sum_k p_k h_k h_k^H + B Q B^H + noise """
    B, _ = interference_matrices(ch)
    Q = covariance_q(d)
    return hermitian(uplink_covariance(d.p_ul, ch.h_ul)
                     + B @ Q @ B.conj().T
                     + ch.noise_bs * np.eye(ch.n_rx))


def uplink_interference_covariance(d: Design, ch: ChannelSet, k: int) -> np.ndarray:
    """ sum_{k' != k} p_k' h_k' h_k'^H + C Q C^H + noise """
    _, C = interference_matrices(ch)
    Q = covariance_q(d)
    return hermitian(uplink_covariance(d.p_ul, ch.h_ul, exclude=k)
                     + C @ Q @ C.conj().T
                     + ch.noise_bs * np.eye(ch.n_rx))


def _check_combiner(w: np.ndarray, name: str):
    if not np.any(np.abs(w) > 0):
        raise ValueError(f'{name} must be a nonzero combiner')


def radar_sinr(d: Design, u: np.ndarray, ch: ChannelSet) -> float:
    u = np.asarray(u, dtype=complex)
    _check_combiner(u, 'u')

    Q = covariance_q(d)
    signal = ch.target_gain * np.real(u.conj() @ ch.A0 @ Q @ ch.A0.conj().T @ u)
    interference = np.real(u.conj() @ radar_interference_covariance(d, ch) @ u)
    return float(max(signal, 0.0) / interference)


def uplink_sinr(d: Design, w: Sequence[np.ndarray], ch: ChannelSet) -> np.ndarray:
    sinrs = np.zeros(ch.n_ul)
    for k in range(ch.n_ul):
        wk = np.asarray(w[k], dtype=complex)
        _check_combiner(wk, f'w[{k}]')
        signal = d.p_ul[k] * np.abs(wk.conj() @ ch.h_ul[k]) ** 2
        interference = np.real(wk.conj() @ uplink_interference_covariance(d, ch, k) @ wk)
        sinrs[k] = signal / interference
    return sinrs


def downlink_sinr(d: Design, ch: ChannelSet) -> np.ndarray:
    if ch.n_dl == 0:
        return np.zeros(0)
    g = ch.g_dl
    dedicated = np.real(np.einsum('li,ij,lj->l', g.conj(), d.V0, g))

    if isinstance(d, TransmitDesign):
        # gains[l, l'] = g_l^H v_l'
        gains = np.abs(g.conj() @ d.v_dl.T) ** 2
        signal = np.diag(gains)
        leakage = gains.sum(axis=1) - signal
    else:
        # per-user quadratic forms g_l^H V_l' g_l
        forms = np.real(np.einsum('li,mij,lj->lm', g.conj(), d.V_dl, g))
        signal = np.diag(forms)
        leakage = forms.sum(axis=1) - signal

    return signal / (leakage + dedicated + ch.noise_dl)


def sinr_report(d: Design, receivers, ch: ChannelSet) -> SinrReport:
    """ evaluates every SINR for a design and its receive combiners """
    return SinrReport(radar=radar_sinr(d, receivers.u, ch),
                      uplink=uplink_sinr(d, receivers.w_ul, ch),
                      downlink=downlink_sinr(d, ch))


def simulate_symbols(d: TransmitDesign, ch: ChannelSet, n_frames: int, seed: int = fi.SEED,
                     receivers=None) -> SinrReport:
    """ symbol-level estimate of every SINR.

    draws unit-power gaussian symbols for the downlink and uplink streams,
    a radar waveform with covariance V0 and receiver noise, builds the
    received signals at the BS and at each downlink user, and returns the
    ratio of empirical signal and interference-plus-noise powers seen
    through the given combiners (the closed-form optimal ones by default).
    """
    if n_frames < 1:
        raise ValueError(f'n_frames must be >= 1, got {n_frames}')
    if receivers is None:
        receivers = fi.receivers.optimal_receivers(d, ch)

    # raises on a non-PSD radar covariance
    radar_factor = psd_factor(d.V0)

    rng = np.random.default_rng(seed)
    n_dl, n_ul = ch.n_dl, ch.n_ul
    s_dl = cn(rng, (n_dl, n_frames))
    s_radar = radar_factor @ cn(rng, (ch.n_tx, n_frames))
    d_ul = np.sqrt(d.p_ul)[:, None] * cn(rng, (n_ul, n_frames))
    noise_bs = cn(rng, (ch.n_rx, n_frames), ch.noise_bs)
    noise_dl = np.sqrt(ch.noise_dl)[:, None] * cn(rng, (n_dl, n_frames))

    x = d.v_dl.T @ s_dl + s_radar
    B, _ = interference_matrices(ch)
    echo = ch.target_amp * (ch.A0 @ x)
    clutter = B @ x
    uplink = ch.h_ul.T @ d_ul

    u = np.asarray(receivers.u, dtype=complex)
    _check_combiner(u, 'u')
    radar = _power(u.conj() @ echo) / _power(u.conj() @ (clutter + uplink + noise_bs))

    ul = np.zeros(n_ul)
    for k in range(n_ul):
        wk = np.asarray(receivers.w_ul[k], dtype=complex)
        _check_combiner(wk, f'w[{k}]')
        own = np.outer(ch.h_ul[k], d_ul[k])
        rest = uplink - own + echo + clutter + noise_bs
        ul[k] = _power(wk.conj() @ own) / _power(wk.conj() @ rest)

    dl = np.zeros(n_dl)
    for l in range(n_dl):
        g = ch.g_dl[l].conj()
        own = (g @ d.v_dl[l]) * s_dl[l]
        rest = g @ x - own + noise_dl[l]
        dl[l] = _power(own) / _power(rest)

    return SinrReport(radar=float(radar), uplink=ul, downlink=dl)


def _power(samples: np.ndarray) -> float:
    return float(np.mean(np.abs(samples) ** 2))


def beampattern_gain(u: np.ndarray, d: Design, ch: ChannelSet,
                     angle_grid: Sequence[float]) -> np.ndarray:
    """ expected receive-combined gain per angle,
    |u^H a_r|^2 a_t^H Q a_t / (noise u^H u)
    """
    u = np.asarray(u, dtype=complex)
    _check_combiner(u, 'u')
    Q = covariance_q(d)

    gains = np.zeros(len(angle_grid))
    for i, angle in enumerate(angle_grid):
        a_t = make_steering(angle, ch.n_tx)
        a_r = make_steering(angle, ch.n_rx)
        receive = np.abs(u.conj() @ a_r) ** 2
        transmit = np.real(a_t.conj() @ Q @ a_t)
        gains[i] = receive * max(transmit, 0.0)
    return gains / (ch.noise_bs * np.real(u.conj() @ u))


def beampattern_frame(u: np.ndarray, d: Design, ch: ChannelSet,
                      angle_grid: Sequence[float]) -> pd.DataFrame:
    gains = beampattern_gain(u, d, ch, angle_grid)
    return pd.DataFrame({'angle_deg': np.asarray(angle_grid, dtype=float),
                         'gain_db': lin2db(gains)})


def pattern_shape(frame: pd.DataFrame, null_angles: Sequence[float]) -> Tuple[float, float]:
    """ (angle of the largest gain, dB between that peak and the strongest
    of the grid points nearest null_angles). inf depth without null angles
    """
    peak = frame.gain_db.idxmax()
    angles = frame.angle_deg.to_numpy()
    nulls = [frame.gain_db.iloc[int(np.argmin(np.abs(angles - a)))] for a in null_angles]
    depth = frame.gain_db[peak] - max(nulls) if nulls else np.inf
    return float(frame.angle_deg[peak]), float(depth)
