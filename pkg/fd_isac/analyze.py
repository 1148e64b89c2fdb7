""" analyze.py - sweep aggregation and trend checks"""
import fd_isac as fi
from fd_isac.baselines import COMM_ONLY, FD_PROPOSED, HD_MODE
from fd_isac.utils.data import load_records_csv, read_csv_header
from fd_isac.utils.linalg import lin2db

import glob
from pathlib import Path
import logging

from colorama import Fore, Style
import numpy as np
import pandas as pd
from natsort import natsorted

ANALYSES_DIR = fi.ROOT_DIR / 'analyses'

# slack for "fd <= hd" comparisons, dB
FD_HD_SLACK_DB = 0.1
# slack for monotonicity of means, dB
MONOTONE_SLACK_DB = 0.01


def summarize(df: pd.DataFrame) -> pd.DataFrame:
    """
    mean / stderr of the total power per (scheme, grid value), over the
    seeds that converged
    """
    rows = []
    all_schemes = list(natsorted(df['scheme'].unique()))
    all_values = list(natsorted(df['grid_value'].unique()))
    for scheme in all_schemes:
        for value in all_values:
            subset = df[(df.scheme == scheme) & (df.grid_value == value)]
            if subset.empty:
                continue
            ok = subset[subset.converged.astype(bool)]
            powers = ok['power_mw'].values.astype(float)
            n = len(powers)
            mean = float(np.mean(powers)) if n else np.nan
            stderr = float(np.std(powers, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
            rows.append({
                'scheme': scheme,
                'variable': subset['variable'].iloc[0],
                'grid_value': value,
                'mean_mw': mean,
                'stderr_mw': stderr,
                'mean_dbm': float(lin2db(mean)) if n else np.nan,
                'n_converged': n,
                'n_failed': len(subset) - n,
            })
    return pd.DataFrame(rows)


def _check(name: str, passed: bool, detail: str) -> dict:
    return {'check': name, 'passed': bool(passed), 'detail': detail}


def trend_checks(df: pd.DataFrame) -> pd.DataFrame:
    """
    qualitative checks on a sweep:
      radar threshold sweeps - comm_only constant per seed, fd mean
        non-decreasing, fd <= hd per cell, fd/comm_only gap widening
      antenna sweeps - every scheme's mean non-increasing
    """
    checks = []
    df = df[df.converged.astype(bool)]
    if df.empty:
        return pd.DataFrame([_check('any-converged', False, 'no converged cells')])
    variable = df['variable'].iloc[0]
    schemes = set(df['scheme'])
    summary = summarize(df)

    def means(scheme):
        sub = summary[summary.scheme == scheme]
        return sub.sort_values('grid_value')['mean_dbm'].values

    if variable == 'radar_sinr_db':
        if COMM_ONLY in schemes:
            comm = df[df.scheme == COMM_ONLY]
            spread = comm.groupby('seed')['power_mw'].agg(lambda p: (p.max() - p.min()) / max(p.max(), 1e-300))
            checks.append(_check('comm_only-constant', (spread <= 1e-9).all(),
                                 f'worst relative spread {spread.max():.2e}'))
        if FD_PROPOSED in schemes:
            fd = means(FD_PROPOSED)
            steps = np.diff(fd)
            checks.append(_check('fd-non-decreasing', (steps >= -MONOTONE_SLACK_DB).all(),
                                 f'smallest step {steps.min() if steps.size else 0:.3f} dB'))
        if {FD_PROPOSED, HD_MODE} <= schemes:
            cells = df[df.scheme.isin([FD_PROPOSED, HD_MODE])].pivot_table(
                index=['seed', 'grid_value'], columns='scheme', values='power_dbm').dropna()
            margin = cells[HD_MODE] - cells[FD_PROPOSED]
            checks.append(_check('fd-below-hd', (margin >= -FD_HD_SLACK_DB).all(),
                                 f'smallest hd - fd margin {margin.min():.3f} dB over {len(margin)} cells'))
        if {FD_PROPOSED, COMM_ONLY} <= schemes:
            gap = means(FD_PROPOSED) - means(COMM_ONLY)
            checks.append(_check('fd-gap-widening', gap.size > 1 and gap[-1] > gap[0],
                                 f'gap {gap[0]:.3f} dB -> {gap[-1]:.3f} dB'))
    elif variable == 'n_antennas':
        for scheme in natsorted(schemes):
            m = means(scheme)
            checks.append(_check(f'{scheme}-non-increasing', m[-1] <= m[0] + MONOTONE_SLACK_DB,
                                 f'{m[0]:.3f} dBm -> {m[-1]:.3f} dBm'))

    return pd.DataFrame(checks)


def print_checks(checks: pd.DataFrame):
    for _, row in checks.iterrows():
        color = Fore.GREEN if row['passed'] else Fore.RED
        print(f"{color}{'PASS' if row['passed'] else 'FAIL'}{Style.RESET_ALL} "
              f"{row['check']}: {row['detail']}")


def analyze(df: pd.DataFrame, name: str):
    """
    summarize a sweep DataFrame and run the trend checks,
    writing both under /analyses/<name>
    """
    output_dir = ANALYSES_DIR / name
    output_dir.mkdir(parents=True, exist_ok=True)

    summary = summarize(df)
    summary.to_csv(output_dir / 'summary.csv', index=False)

    checks = trend_checks(df)
    checks.to_csv(output_dir / 'checks.csv', index=False)
    print_checks(checks)

    return summary, checks


def load_sweep_results(path_to_results: str, pattern: str = '**/sweep.csv') -> pd.DataFrame:
    """
    Will look for sweep csv files recursively and create a single
    DataFrame for all of them
    """
    filepaths = glob.glob(str(Path(path_to_results) / pattern), recursive=True)
    if not filepaths:
        raise FileNotFoundError(f'no sweep results under {path_to_results}')
    frames = []
    for fp in natsorted(filepaths):
        logging.info(f'loading {fp} ({", ".join(read_csv_header(fp))})')
        frames.append(pd.DataFrame(load_records_csv(fp)))
    df = pd.concat(frames, ignore_index=True)
    return df.drop_duplicates()


def analyze_folder(path_to_results: str, name: str):
    return analyze(load_sweep_results(path_to_results), name)


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser()

    parser.add_argument('path_to_results', type=str,
                        help='path to the folder containing sweep csvs')
    parser.add_argument('name', type=str,
                        help='name of folder with analysis output. will be under /analyses/')
    args = parser.parse_args()

    analyze_folder(**vars(args))
