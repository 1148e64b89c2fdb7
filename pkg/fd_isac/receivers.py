"""receivers.py - closed-form radar and uplink combiners"""
from fd_isac.scenario import ChannelSet
from fd_isac.signal_metrics import (Design, covariance_q, radar_interference_covariance,
                                    uplink_interference_covariance)
from fd_isac.utils.linalg import hermitian, solve_pd

from dataclasses import dataclass
from typing import List

import numpy as np
import scipy.linalg


@dataclass(frozen=True, eq=False)
class ReceiveDesign:
    """ radar combiner u (N_r,) and uplink combiners w_ul (K, N_r) """
    u: np.ndarray
    w_ul: np.ndarray


@dataclass(frozen=True, eq=False)
class WhiteningMatrices:
    """ interference-plus-noise covariances at the BS receiver.

    psi: seen by the radar echo (all uplink users + clutter + SI + noise)
    phi: one per uplink user k (other users + echo + clutter + SI + noise)
    """
    psi: np.ndarray
    phi: List[np.ndarray]


def build_whitening(d: Design, ch: ChannelSet) -> WhiteningMatrices:
    psi = radar_interference_covariance(d, ch)
    phi = [uplink_interference_covariance(d, ch, k) for k in range(ch.n_ul)]
    return WhiteningMatrices(psi=psi, phi=phi)


def optimal_receivers(d: Design, ch: ChannelSet, whitening: WhiteningMatrices = None) -> ReceiveDesign:
    """ MVDR combiners u = psi^-1 a_r0 and w_k = phi_k^-1 h_k,
    left unnormalized.
    """
    whitening = whitening or build_whitening(d, ch)
    u = solve_pd(whitening.psi, ch.a_r0)
    w_ul = np.zeros((ch.n_ul, ch.n_rx), dtype=complex)
    for k in range(ch.n_ul):
        w_ul[k] = solve_pd(whitening.phi[k], ch.h_ul[k])
    return ReceiveDesign(u=u, w_ul=w_ul)


def reduced_radar_sinr(d: Design, ch: ChannelSet, whitening: WhiteningMatrices = None) -> float:
    """ radar SINR at the optimal combiner,
    |beta_0|^2 (a_t0^H Q a_t0) (a_r0^H psi^-1 a_r0)
    """
    whitening = whitening or build_whitening(d, ch)
    Q = covariance_q(d)
    transmit = np.real(ch.a_t0.conj() @ Q @ ch.a_t0)
    receive = np.real(ch.a_r0.conj() @ solve_pd(whitening.psi, ch.a_r0))
    return float(ch.target_gain * max(transmit, 0.0) * receive)


def reduced_uplink_sinr(d: Design, ch: ChannelSet, whitening: WhiteningMatrices = None) -> np.ndarray:
    """ uplink SINRs at the optimal combiners, p_k h_k^H phi_k^-1 h_k """
    whitening = whitening or build_whitening(d, ch)
    sinrs = np.zeros(ch.n_ul)
    for k in range(ch.n_ul):
        h = ch.h_ul[k]
        sinrs[k] = d.p_ul[k] * np.real(h.conj() @ solve_pd(whitening.phi[k], h))
    return sinrs


def principal_generalized_eigenvalue(d: Design, ch: ChannelSet) -> float:
    """ largest eigenvalue of the pencil (|beta_0|^2 A0 Q A0^H, psi) """
    Q = covariance_q(d)
    signal = hermitian(ch.target_gain * ch.A0 @ Q @ ch.A0.conj().T)
    psi = build_whitening(d, ch).psi
    eigvals = scipy.linalg.eigh(signal, psi, eigvals_only=True)
    return float(eigvals[-1])
