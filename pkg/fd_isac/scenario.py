"""scenario.py - system configuration and channel realization"""
import fd_isac as fi
from fd_isac.utils.linalg import db2lin, cn, outer

from dataclasses import dataclass, field, fields, replace, asdict
from numbers import Integral, Real
from pathlib import Path
from typing import Tuple
import json

import numpy as np
import yaml


class ConfigError(ValueError):
    """ invalid configuration. `key` names the offending entry """

    def __init__(self, message: str, key: str = None):
        self.key = key
        if key is not None and key not in message:
            message = f'{key}: {message}'
        super().__init__(message)


# per-user fields broadcast from a scalar to the user count
_PER_DL_USER = ('noise_dl_dbm', 'dl_sinr_db')
_PER_UL_USER = ('ul_sinr_db',)
_INT_FIELDS = ('n_tx', 'n_rx', 'n_ul_users', 'n_dl_users', 'rng_seed')
_LIST_FIELDS = ('interferer_angles_deg', 'interferer_gains_dbm') + _PER_DL_USER + _PER_UL_USER
# thresholds may be -inf (constraint switched off)
_THRESHOLD_FIELDS = ('radar_sinr_db', 'ul_sinr_db', 'dl_sinr_db')


def _as_tuple(value, key: str, length: int = None) -> Tuple[float, ...]:
    if isinstance(value, Real):
        if length is None:
            raise ConfigError('expected a list of values', key)
        return (float(value),) * length
    try:
        values = tuple(float(v) for v in value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f'expected a number or a list of numbers, got {value!r}', key) from e
    if length is not None and len(values) != length:
        raise ConfigError(f'expected {length} values, got {len(values)}', key)
    return values


@dataclass(frozen=True)
class SystemConfig:
    """ physical scenario, in dB/dBm. the defaults are the standard
    evaluation scenario (8x8 arrays, 3 UL and 3 DL users, target at 0 deg,
    interferers at -60 and 45 deg).
    """
    n_tx: int = 8
    n_rx: int = 8
    n_ul_users: int = 3
    n_dl_users: int = 3
    target_angle_deg: float = 0.0
    interferer_angles_deg: Tuple[float, ...] = (-60.0, 45.0)
    target_gain_dbm: float = -100.0
    interferer_gains_dbm: Tuple[float, ...] = -90.0
    pathloss_db: float = -99.0
    si_attenuation_db: float = -110.0
    noise_bs_dbm: float = -100.0
    noise_dl_dbm: Tuple[float, ...] = -100.0
    radar_sinr_db: float = 6.0
    ul_sinr_db: Tuple[float, ...] = 5.0
    dl_sinr_db: Tuple[float, ...] = 8.0
    rng_seed: int = fi.SEED

    def __post_init__(self):
        for key in _INT_FIELDS:
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, Integral):
                raise ConfigError(f'expected an integer, got {value!r}', key)
            object.__setattr__(self, key, int(value))

        if self.n_tx < 1:
            raise ConfigError(f'must be >= 1, got {self.n_tx}', 'n_tx')
        if self.n_rx < 1:
            raise ConfigError(f'must be >= 1, got {self.n_rx}', 'n_rx')
        if self.n_ul_users < 0:
            raise ConfigError(f'must be >= 0, got {self.n_ul_users}', 'n_ul_users')
        if self.n_dl_users < 0:
            raise ConfigError(f'must be >= 0, got {self.n_dl_users}', 'n_dl_users')
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ConfigError('must be a 64-bit unsigned integer', 'rng_seed')

        angles = _as_tuple(self.interferer_angles_deg, 'interferer_angles_deg')
        object.__setattr__(self, 'interferer_angles_deg', angles)
        object.__setattr__(self, 'interferer_gains_dbm',
                           _as_tuple(self.interferer_gains_dbm, 'interferer_gains_dbm', len(angles)))
        for key in _PER_DL_USER:
            object.__setattr__(self, key, _as_tuple(getattr(self, key), key, self.n_dl_users))
        for key in _PER_UL_USER:
            object.__setattr__(self, key, _as_tuple(getattr(self, key), key, self.n_ul_users))

        for f in fields(self):
            if f.name in _INT_FIELDS:
                continue
            value = getattr(self, f.name)
            values = value if isinstance(value, tuple) else (value,)
            try:
                values = tuple(float(v) for v in values)
            except (TypeError, ValueError) as e:
                raise ConfigError(f'expected a number, got {value!r}', f.name) from e
            if not isinstance(value, tuple):
                object.__setattr__(self, f.name, values[0])
            if any(np.isnan(v) or v == np.inf for v in values):
                raise ConfigError('must not be NaN or +inf', f.name)
            if f.name not in _THRESHOLD_FIELDS and not all(np.isfinite(values)):
                raise ConfigError('must be finite', f.name)

        if not -90.0 <= self.target_angle_deg <= 90.0:
            raise ConfigError('must lie in [-90, 90]', 'target_angle_deg')
        if any(not -90.0 <= a <= 90.0 for a in angles):
            raise ConfigError('every angle must lie in [-90, 90]', 'interferer_angles_deg')
        if len(set(angles)) != len(angles):
            raise ConfigError('interferer angles must be pairwise distinct', 'interferer_angles_deg')
        if self.target_angle_deg in angles:
            raise ConfigError('interferer angles must differ from the target angle',
                              'interferer_angles_deg')

    # linear-scale accessors (mW for powers)
    @property
    def target_gain(self) -> float:
        return float(db2lin(self.target_gain_dbm))

    @property
    def interferer_gains(self) -> np.ndarray:
        return db2lin(self.interferer_gains_dbm)

    @property
    def channel_gain(self) -> float:
        return float(db2lin(self.pathloss_db))

    @property
    def si_amplitude(self) -> float:
        return float(np.sqrt(db2lin(self.si_attenuation_db)))

    @property
    def noise_bs(self) -> float:
        return float(db2lin(self.noise_bs_dbm))

    @property
    def noise_dl(self) -> np.ndarray:
        return db2lin(self.noise_dl_dbm)

    @property
    def radar_threshold(self) -> float:
        return float(db2lin(self.radar_sinr_db))

    @property
    def ul_thresholds(self) -> np.ndarray:
        return db2lin(self.ul_sinr_db)

    @property
    def dl_thresholds(self) -> np.ndarray:
        return db2lin(self.dl_sinr_db)

    # restricted copies
    def without_uplink(self) -> 'SystemConfig':
        return replace(self, n_ul_users=0, ul_sinr_db=())

    def without_downlink(self) -> 'SystemConfig':
        return replace(self, n_dl_users=0, noise_dl_dbm=(), dl_sinr_db=())

    def with_antennas(self, n: int) -> 'SystemConfig':
        return replace(self, n_tx=int(n), n_rx=int(n))

    def with_radar_threshold(self, radar_sinr_db: float) -> 'SystemConfig':
        return replace(self, radar_sinr_db=float(radar_sinr_db))

    def with_seed(self, seed: int) -> 'SystemConfig':
        return replace(self, rng_seed=int(seed))

    # serialization
    def to_entry(self) -> dict:
        entry = asdict(self)
        for key in _LIST_FIELDS:
            entry[key] = list(entry[key])
        return entry

    @classmethod
    def from_entry(cls, entry: dict) -> 'SystemConfig':
        if not isinstance(entry, dict):
            raise ConfigError(f'expected a mapping, got {type(entry).__name__}', 'system')
        known = {f.name for f in fields(cls)}
        for key in entry:
            if key not in known:
                raise ConfigError(f'unknown key {key!r}', key)

        kwargs = {}
        for key, value in entry.items():
            if key in _INT_FIELDS and isinstance(value, float) and value.is_integer():
                value = int(value)
            if isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
        try:
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), 'system') from e


def read_config_entry(path) -> dict:
    """ reads a config file and checks its top-level layout
    ({schema_version, system, sca}).
    """
    path = Path(path)
    try:
        entry = fi.utils.data.load_entry(path)
    except FileNotFoundError as e:
        raise ConfigError(f'config file not found: {path}', str(path)) from e
    except (OSError, json.JSONDecodeError, yaml.YAMLError, UnicodeDecodeError) as e:
        raise ConfigError(f'could not parse {path}: {e}', str(path)) from e

    if not isinstance(entry, dict):
        raise ConfigError(f'{path}: expected a mapping at the top level', 'schema_version')
    for key in entry:
        if key not in ('schema_version', 'system', 'sca'):
            raise ConfigError(f'unknown key {key!r}', key)
    if 'schema_version' not in entry:
        raise ConfigError('missing schema_version', 'schema_version')
    if entry['schema_version'] != fi.SCHEMA_VERSION:
        raise ConfigError(f'unsupported schema_version {entry["schema_version"]!r} '
                          f'(expected {fi.SCHEMA_VERSION})', 'schema_version')
    if 'system' not in entry:
        raise ConfigError('missing system section', 'system')
    return entry


def save_config(cfg: SystemConfig, path, sca: dict = None):
    entry = {'schema_version': fi.SCHEMA_VERSION, 'system': cfg.to_entry()}
    if sca is not None:
        entry['sca'] = dict(sca)
    return fi.utils.data.save_entry(entry, path, format='json')


def make_steering(angle_deg: float, n: int) -> np.ndarray:
    """ half-wavelength ULA response, entry m = exp(j pi m sin(angle)) """
    m = np.arange(n)
    return np.exp(1j * np.pi * m * np.sin(np.deg2rad(angle_deg)))


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """ one channel realization, linear scale.

    h_ul: (K, N_r) uplink channels, one row per user
    g_dl: (L, N_t) downlink channels, one row per user
    interferer_matrices: (I, N_r, N_t) two-way steering matrices a_r a_t^H
    interferer_amps: (I,) complex reflection amplitudes
    """
    h_ul: np.ndarray
    g_dl: np.ndarray
    a_t0: np.ndarray
    a_r0: np.ndarray
    target_amp: complex
    interferer_amps: np.ndarray
    interferer_matrices: np.ndarray
    h_si: np.ndarray
    noise_bs: float
    noise_dl: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_tx(self) -> int:
        return self.a_t0.shape[0]

    @property
    def n_rx(self) -> int:
        return self.a_r0.shape[0]

    @property
    def n_ul(self) -> int:
        return self.h_ul.shape[0]

    @property
    def n_dl(self) -> int:
        return self.g_dl.shape[0]

    @property
    def A0(self) -> np.ndarray:
        """ two-way target channel a_r0 a_t0^H """
        return outer(self.a_r0, self.a_t0)

    @property
    def target_gain(self) -> float:
        return float(np.abs(self.target_amp) ** 2)

    def without_uplink(self) -> 'ChannelSet':
        return replace(self, h_ul=self.h_ul[:0])

    def without_downlink(self) -> 'ChannelSet':
        return replace(self, g_dl=self.g_dl[:0], noise_dl=self.noise_dl[:0])


def realize_channels(cfg: SystemConfig, seed: int = None) -> ChannelSet:
    """ draws a channel realization. a pure function of (cfg, seed);
    seed defaults to cfg.rng_seed.

    the seed is split into independent streams for the uplink channels,
    downlink channels, reflection phases and SI phases.
    """
    seed = cfg.rng_seed if seed is None else int(seed)
    ul_rng, dl_rng, phase_rng, si_rng = [
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]

    h_ul = cn(ul_rng, (cfg.n_ul_users, cfg.n_rx), cfg.channel_gain)
    g_dl = cn(dl_rng, (cfg.n_dl_users, cfg.n_tx), cfg.channel_gain)

    n_int = len(cfg.interferer_angles_deg)
    phases = phase_rng.uniform(0, 2 * np.pi, size=1 + n_int)
    target_amp = np.sqrt(cfg.target_gain) * np.exp(1j * phases[0])
    interferer_amps = np.sqrt(cfg.interferer_gains) * np.exp(1j * phases[1:])

    interferer_matrices = np.zeros((n_int, cfg.n_rx, cfg.n_tx), dtype=complex)
    for i, angle in enumerate(cfg.interferer_angles_deg):
        interferer_matrices[i] = outer(make_steering(angle, cfg.n_rx),
                                       make_steering(angle, cfg.n_tx))

    si_phases = si_rng.uniform(0, 2 * np.pi, size=(cfg.n_rx, cfg.n_tx))
    h_si = cfg.si_amplitude * np.exp(1j * si_phases)

    return ChannelSet(h_ul=h_ul, g_dl=g_dl,
                      a_t0=make_steering(cfg.target_angle_deg, cfg.n_tx),
                      a_r0=make_steering(cfg.target_angle_deg, cfg.n_rx),
                      target_amp=complex(target_amp),
                      interferer_amps=interferer_amps,
                      interferer_matrices=interferer_matrices,
                      h_si=h_si, noise_bs=cfg.noise_bs, noise_dl=cfg.noise_dl)
