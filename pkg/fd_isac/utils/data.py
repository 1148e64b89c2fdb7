import os
import json
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd
import yaml

"""
json and yaml
"""


def _add_file_format_to_filename(path: str, file_format: str):
    if '.' not in file_format:
        file_format = f'.{file_format}'

    if Path(path).suffix != file_format:
        path = Path(path).with_suffix(file_format)
    return str(path)


def _format_from_suffix(path):
    suffix = Path(path).suffix.lower()
    if suffix in ('.yaml', '.yml'):
        return 'yaml'
    return 'json'


def save_entry(entry, path, format='json'):
    """ save to json (or yaml) """
    os.makedirs(Path(path).parent, exist_ok=True)
    path = _add_file_format_to_filename(path, format)
    if format == 'json':
        with open(path, 'w') as f:
            json.dump(entry, f, indent=2)
    elif format == 'yaml':
        with open(path, 'w') as f:
            yaml.safe_dump(entry, f)
    else:
        raise ValueError(f'unsupported format: {format}')
    return path


def load_entry(path, format=None):
    """ load json (or yaml). the format is taken from the suffix
    when not given.
    """
    format = format or _format_from_suffix(path)
    if format == 'json':
        with open(path, 'r', encoding='utf-8') as f:
            entry = json.load(f)
    elif format == 'yaml':
        with open(path, 'r', encoding='utf-8') as f:
            entry = yaml.safe_load(f)
    else:
        raise ValueError(f'unsupported format: {format}')

    return entry


"""
csv
"""


def save_records_csv(records: List[dict], path_to_records, header: List[str] = None):
    """ write records as csv. header lines, if any, are written
    first as '# ' comments.
    """
    os.makedirs(Path(path_to_records).parent, exist_ok=True)
    with open(path_to_records, 'w', newline='') as f:
        for line in header or []:
            f.write(f'# {line}\n')
        pd.DataFrame(records).to_csv(f, index=False)


def load_records_csv(path_to_records):
    assert os.path.exists(path_to_records), f"{path_to_records} does not exist"
    records = pd.read_csv(path_to_records, comment='#').to_dict('records')
    return records


def read_csv_header(path_to_records):
    """ returns the '# ' comment lines at the top of a csv """
    lines = []
    with open(path_to_records, 'r') as f:
        for line in f:
            if not line.startswith('#'):
                break
            lines.append(line[1:].strip())
    return lines


"""
matrix text format

    # <name>
    <rows> <cols>
    re im re im ...      (one line per row, cols pairs per line)
"""


def save_matrix(matrix, path, name: str = None):
    """ writes a complex vector or matrix in the matrix text format.
    vectors are stored as a single column.
    """
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    assert matrix.ndim == 2, f'expected a vector or matrix, got shape {matrix.shape}'

    os.makedirs(Path(path).parent, exist_ok=True)
    rows, cols = matrix.shape
    with open(path, 'w') as f:
        f.write(f'# {name or Path(path).stem}\n')
        f.write(f'{rows} {cols}\n')
        for row in matrix:
            pairs = ' '.join(f'{z.real:.17g} {z.imag:.17g}' for z in row)
            f.write(pairs + '\n')


def load_matrix(path) -> np.ndarray:
    """ reads a matrix written by save_matrix as a 2D complex array """
    with open(path, 'r') as f:
        lines = [l.strip() for l in f if l.strip() and not l.startswith('#')]

    rows, cols = (int(x) for x in lines[0].split())
    body = lines[1:]
    if len(body) != rows:
        raise ValueError(f'{path}: expected {rows} rows, found {len(body)}')

    matrix = np.zeros((rows, cols), dtype=complex)
    for i, line in enumerate(body):
        values = np.array([float(x) for x in line.split()])
        if values.size != 2 * cols:
            raise ValueError(f'{path}: row {i} has {values.size} values, expected {2 * cols}')
        matrix[i] = values[0::2] + 1j * values[1::2]
    return matrix


