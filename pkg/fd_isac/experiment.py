"""experiment.py - solve, beampattern and sweep commands

every command returns a process exit code:
    0  converged, feasible design
    2  configuration error
    3  infeasible (no feasible SCA start)
    4  solver failure, max_iters reached or a design missing a
       threshold by more than feas_tol_db
"""
import fd_isac as fi
from fd_isac.baselines import HD_THRESHOLDS, IDENTICAL, SCHEMES, solve_scheme
from fd_isac.sca import (DegenerateSolutionError, InfeasibleStartError, ScaError,
                         ScaSettings, solve_joint)
from fd_isac.scenario import ConfigError, SystemConfig, read_config_entry, realize_channels
from fd_isac.signal_metrics import beampattern_frame
from fd_isac.utils.data import load_entry, save_matrix, save_records_csv
from fd_isac.utils.linalg import lin2db

from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import List, Tuple
import json
import logging
import sys

from colorama import Fore, Style
import numpy as np
import pandas as pd
import tqdm
from tqdm.contrib.concurrent import process_map
import yaml

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4

SWEEP_VARIABLES = ('radar_sinr_db', 'n_antennas')
SWEEP_KEYS = ('schema_version', 'variable', 'grid', 'n_seeds', 'schemes',
              'base_config', 'hd_thresholds', 'sca')


def load_run_config(path) -> Tuple[SystemConfig, ScaSettings]:
    entry = read_config_entry(path)
    cfg = SystemConfig.from_entry(entry['system'])
    settings = ScaSettings.from_entry(entry.get('sca'))
    logging.info(f'loaded config from {path}')
    return cfg, settings


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: Tuple[float, ...]
    n_seeds: int
    schemes: Tuple[str, ...]
    base_config: SystemConfig
    hd_thresholds: str = IDENTICAL
    settings: ScaSettings = field(default_factory=ScaSettings)

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f'unknown sweep variable {self.variable!r}, '
                              f'expected one of {SWEEP_VARIABLES}', 'variable')
        if len(self.grid) == 0:
            raise ConfigError('grid must not be empty', 'grid')
        if self.variable == 'n_antennas' and any(v != int(v) or v < 1 for v in self.grid):
            raise ConfigError('antenna counts must be positive integers', 'grid')
        if self.n_seeds < 1:
            raise ConfigError(f'must be >= 1, got {self.n_seeds}', 'n_seeds')
        if not self.schemes:
            raise ConfigError('at least one scheme is required', 'schemes')
        for scheme in self.schemes:
            if scheme not in SCHEMES:
                raise ConfigError(f'unknown scheme {scheme!r}, expected one of {SCHEMES}', 'schemes')
        if self.hd_thresholds not in HD_THRESHOLDS:
            raise ConfigError(f'unknown convention {self.hd_thresholds!r}, '
                              f'expected one of {HD_THRESHOLDS}', 'hd_thresholds')

    def cell_config(self, value: float, seed: int) -> SystemConfig:
        cfg = self.base_config.with_seed(seed)
        if self.variable == 'radar_sinr_db':
            return cfg.with_radar_threshold(value)
        return cfg.with_antennas(int(value))


def load_sweep(path) -> SweepSpec:
    path = Path(path)
    try:
        entry = load_entry(path)
    except FileNotFoundError as e:
        raise ConfigError(f'sweep file not found: {path}', str(path)) from e
    except (OSError, json.JSONDecodeError, yaml.YAMLError, UnicodeDecodeError) as e:
        raise ConfigError(f'could not parse {path}: {e}', str(path)) from e
    if not isinstance(entry, dict):
        raise ConfigError(f'{path}: expected a mapping at the top level', 'schema_version')

    for key in entry:
        if key not in SWEEP_KEYS:
            raise ConfigError(f'unknown key {key!r}', key)
    for key in ('schema_version', 'variable', 'grid', 'base_config'):
        if key not in entry:
            raise ConfigError(f'missing {key}', key)
    if entry['schema_version'] != fi.SCHEMA_VERSION:
        raise ConfigError(f'unsupported schema_version {entry["schema_version"]!r}', 'schema_version')

    base = entry['base_config']
    sca_entry = entry.get('sca')
    if isinstance(base, str):
        base_entry = read_config_entry(path.parent / base)
        cfg = SystemConfig.from_entry(base_entry['system'])
        sca_entry = sca_entry if sca_entry is not None else base_entry.get('sca')
    elif isinstance(base, dict):
        for key in base:
            if key != 'system':
                raise ConfigError(f'unknown key {key!r}', key)
        cfg = SystemConfig.from_entry(base.get('system', {}))
    else:
        raise ConfigError('expected a config path or a {"system": ...} mapping', 'base_config')

    try:
        grid = tuple(float(v) for v in entry['grid'])
        n_seeds = int(entry.get('n_seeds', 1))
    except (TypeError, ValueError) as e:
        raise ConfigError(f'expected numbers: {e}', 'grid') from e
    schemes = entry.get('schemes', list(SCHEMES))
    if isinstance(schemes, str):
        schemes = [schemes]

    return SweepSpec(variable=entry['variable'], grid=grid, n_seeds=n_seeds,
                     schemes=tuple(schemes), base_config=cfg,
                     hd_thresholds=entry.get('hd_thresholds', IDENTICAL),
                     settings=ScaSettings.from_entry(sca_entry))


"""
solve and beampattern
"""


def _print_summary(power_mw: float, slacks: dict):
    parts = [f'total power {lin2db(power_mw):.3f} dBm']
    for name, slack in slacks.items():
        if np.isinf(slack):
            continue
        color = Fore.GREEN if slack >= 0 else Fore.RED
        parts.append(f'{name} {color}{slack:+.3f} dB{Style.RESET_ALL}')
    print(' | '.join(parts))


def _solve_config(config_path, seed: int = None, dump_dir=None):
    """ returns (exit code, cfg, channels, design, receivers, trace) """
    try:
        cfg, settings = load_run_config(config_path)
        if seed is not None:
            cfg = cfg.with_seed(seed)
    except ConfigError as e:
        logging.error(f'config error: {e}')
        print(f'config error: {e}', file=sys.stderr)
        return EXIT_CONFIG, None, None, None, None, None

    ch = realize_channels(cfg)
    try:
        design, receivers, trace = solve_joint(ch, cfg, settings, dump_dir=dump_dir)
    except InfeasibleStartError as e:
        logging.error(f'infeasible: {e}')
        return EXIT_INFEASIBLE, cfg, ch, None, None, e.trace
    except ScaError as e:
        logging.error(f'solver failure: {e}')
        return EXIT_SOLVER, cfg, ch, None, None, e.trace
    except DegenerateSolutionError as e:
        logging.error(f'degenerate relaxed solution: {e}')
        return EXIT_SOLVER, cfg, ch, None, None, None

    code = EXIT_OK if trace.converged and trace.feasible else EXIT_SOLVER
    return code, cfg, ch, design, receivers, trace


def write_design(out_dir: Path, design, receivers):
    save_matrix(design.v_dl, out_dir / 'design_v_dl.txt', name='v_dl (one row per downlink user)')
    save_matrix(design.V0, out_dir / 'design_V0.txt', name='V0')
    save_matrix(design.p_ul, out_dir / 'design_p_ul.txt', name='p_ul (mW)')
    save_matrix(receivers.u, out_dir / 'receive_u.txt', name='u')
    save_matrix(receivers.w_ul, out_dir / 'receive_w_ul.txt', name='w_ul (one row per uplink user)')


def cmd_solve(config_path, out_dir=None, seed: int = None, dump_problems: bool = False) -> int:
    """ runs the joint design for one config, writing trace.csv, sinr.csv
    and the design files to out_dir and a summary line to stdout
    """
    out_dir = Path(out_dir or fi.RESULTS_DIR / 'solve')
    dump_dir = out_dir / 'problems' if dump_problems else None
    code, cfg, ch, design, receivers, trace = _solve_config(config_path, seed, dump_dir)
    if trace is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        trace.to_frame().to_csv(out_dir / 'trace.csv', index=False)
    if design is None:
        return code

    write_design(out_dir, design, receivers)
    record = {'total_power_mw': design.total_power,
              'total_power_dbm': float(lin2db(design.total_power)),
              'termination': trace.termination,
              'iterations': trace.iterations_used}
    record.update(trace.final_sinrs.to_record())
    record.update({f'slack_{k}_db': v for k, v in trace.slacks_db.items()})
    save_records_csv([record], out_dir / 'sinr.csv')

    _print_summary(design.total_power, trace.slacks_db)
    logging.info(f'wrote results to {out_dir}')
    return code


def angle_grid(step_deg: float) -> np.ndarray:
    """ [-90, 90] inclusive with the given step """
    if step_deg <= 0:
        raise ConfigError(f'must be positive, got {step_deg}', 'grid_step')
    n = int(round(180.0 / step_deg))
    if not np.isclose(n * step_deg, 180.0):
        raise ConfigError(f'{step_deg} does not divide 180', 'grid_step')
    return np.linspace(-90.0, 90.0, n + 1)


def cmd_beampattern(config_path, out_dir=None, grid_step: float = 1.0, seed: int = None) -> int:
    """ solves, then writes the (angle_deg, gain_db) table of the
    optimized design to beampattern.csv
    """
    out_dir = Path(out_dir or fi.RESULTS_DIR / 'beampattern')
    try:
        grid = angle_grid(grid_step)
    except ConfigError as e:
        print(f'config error: {e}', file=sys.stderr)
        return EXIT_CONFIG

    code, cfg, ch, design, receivers, trace = _solve_config(config_path, seed)
    if design is None:
        return code

    frame = beampattern_frame(receivers.u, design, ch, grid)
    header = [f'target_angle_deg {cfg.target_angle_deg:g}',
              'interferer_angles_deg ' + ' '.join(f'{a:g}' for a in cfg.interferer_angles_deg),
              f'total_power_dbm {lin2db(design.total_power):.6f}']
    save_records_csv(frame.to_dict('records'), out_dir / 'beampattern.csv', header=header)
    write_design(out_dir, design, receivers)
    logging.info(f'wrote beampattern over {len(grid)} angles to {out_dir}')
    return code


"""
sweeps
"""


def run_cell(args) -> List[dict]:
    """ all schemes for one (grid value, seed) cell. failures are recorded
    in the rows, never raised
    """
    spec, value, seed = args
    rows = []
    try:
        cfg = spec.cell_config(value, seed)
        ch = realize_channels(cfg)
    except ConfigError as e:
        return [_failed_row(spec, scheme, value, seed, 'config_error', e) for scheme in spec.schemes]

    for scheme in spec.schemes:
        try:
            result = solve_scheme(scheme, ch, cfg, spec.settings, hd_thresholds=spec.hd_thresholds)
        except ScaError as e:
            rows.append(_failed_row(spec, scheme, value, seed, e.trace.termination, e))
            continue
        except ValueError as e:
            rows.append(_failed_row(spec, scheme, value, seed, 'error', e))
            continue
        rows.append({
            'scheme': scheme,
            'variable': spec.variable,
            'grid_value': value,
            'seed': seed,
            'power_mw': result.total_power_mw,
            'power_dbm': result.total_power_dbm,
            'converged': result.converged,
            'termination': result.trace.termination,
            'iterations': result.trace.iterations_used,
            'error': '',
        })
    return rows


def _failed_row(spec: SweepSpec, scheme: str, value: float, seed: int, termination: str, e) -> dict:
    return {'scheme': scheme, 'variable': spec.variable, 'grid_value': value, 'seed': seed,
            'power_mw': np.nan, 'power_dbm': np.nan, 'converged': False,
            'termination': termination, 'iterations': 0,
            'error': f'{type(e).__name__}: {e}'}


def sweep_cells(spec: SweepSpec):
    base_seed = spec.base_config.rng_seed
    return [(spec, value, base_seed + i) for value in spec.grid for i in range(spec.n_seeds)]


def run_sweep(spec: SweepSpec, jobs: int = 1) -> pd.DataFrame:
    """ runs every cell and returns rows in canonical (scheme, grid, seed) order """
    cells = sweep_cells(spec)
    if jobs > 1:
        results = process_map(run_cell, cells, max_workers=jobs, chunksize=1,
                              disable=fi.TQDM_DISABLE)
    else:
        results = [run_cell(c) for c in tqdm.tqdm(cells, disable=fi.TQDM_DISABLE)]

    df = pd.DataFrame([row for rows in results for row in rows])
    order = {scheme: i for i, scheme in enumerate(SCHEMES)}
    df = df.sort_values(['scheme', 'grid_value', 'seed'],
                        key=lambda col: col.map(order) if col.name == 'scheme' else col)
    return df.reset_index(drop=True)


def cmd_sweep(sweep_path, out_dir=None, jobs: int = 1, seed: int = None) -> int:
    """ writes sweep.csv (one row per scheme x grid value x seed) and
    sweep-summary.csv (mean / stderr per scheme and grid value)
    """
    try:
        spec = load_sweep(sweep_path)
        if seed is not None:
            spec = replace(spec, base_config=spec.base_config.with_seed(seed))
    except ConfigError as e:
        logging.error(f'config error: {e}')
        print(f'config error: {e}', file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(out_dir or fi.RESULTS_DIR / Path(sweep_path).stem)
    logging.info(f'sweeping {spec.variable} over {list(spec.grid)} '
                 f'({spec.n_seeds} seeds, schemes {", ".join(spec.schemes)})')
    df = run_sweep(spec, jobs=jobs)

    header = [f'sweep {Path(sweep_path).name}',
              f'generated {datetime.now().isoformat(timespec="seconds")}']
    save_records_csv(df.to_dict('records'), out_dir / 'sweep.csv', header=header)

    summary = fi.analyze.summarize(df)
    summary.to_csv(out_dir / 'sweep-summary.csv', index=False)
    for _, row in summary.iterrows():
        print(f"{row['scheme']:>12} {row['grid_value']:>8g}: {row['mean_dbm']:.3f} dBm "
              f"({row['n_converged']} converged, {row['n_failed']} failed)")
    fi.analyze.print_checks(fi.analyze.trend_checks(df))

    n_failed = int((~df.converged.astype(bool)).sum())
    if n_failed:
        logging.warning(f'{n_failed} of {len(df)} runs did not converge')
    logging.info(f'wrote sweep results to {out_dir}')
    return EXIT_OK
