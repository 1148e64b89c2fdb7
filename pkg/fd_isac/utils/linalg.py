""" linalg.py - dB conversions and Hermitian/PSD helpers """
import numpy as np
import scipy.linalg

import fd_isac as fi

"""
units
"""


def db2lin(x):
    """ dB (or dBm) to linear scale (or mW). -inf maps to 0 """
    return np.power(10.0, np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    """ linear scale (or mW) to dB (or dBm). 0 maps to -inf """
    x = np.asarray(x, dtype=float)
    with np.errstate(divide='ignore'):
        return 10.0 * np.log10(x)


"""
complex helpers
"""


def hermitian(matrix: np.ndarray) -> np.ndarray:
    """ returns (M + M^H) / 2 """
    return 0.5 * (matrix + matrix.conj().T)


def outer(a: np.ndarray, b: np.ndarray = None) -> np.ndarray:
    """ a b^H (a a^H when b is None) """
    b = a if b is None else b
    return np.outer(a, b.conj())


def quad(a: np.ndarray, matrix: np.ndarray, b: np.ndarray = None) -> complex:
    """ a^H M b (a^H M a when b is None) """
    b = a if b is None else b
    return a.conj() @ matrix @ b


def cn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """ circularly-symmetric complex gaussian draws with variance var """
    scale = np.sqrt(var / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


"""
PSD helpers
"""


def psd_floor(matrix: np.ndarray, scale: float = None) -> float:
    """ eigenvalue floor -PSD_TOL * scale (the trace by default), below
    which a matrix is not PSD
    """
    if scale is None:
        scale = np.real(np.trace(matrix))
    return -fi.PSD_TOL * max(scale, 0.0)


def is_psd(matrix: np.ndarray, scale: float = None) -> bool:
    if matrix.size == 0:
        return True
    eigvals = np.linalg.eigvalsh(hermitian(matrix))
    return eigvals.min() >= psd_floor(matrix, scale)


def clip_psd(matrix: np.ndarray) -> np.ndarray:
    """ projects onto the PSD cone by zeroing negative eigenvalues """
    if matrix.size == 0:
        return matrix
    eigvals, eigvecs = np.linalg.eigh(hermitian(matrix))
    eigvals = np.clip(eigvals, 0, None)
    return (eigvecs * eigvals) @ eigvecs.conj().T


def psd_factor(matrix: np.ndarray) -> np.ndarray:
    """ returns F with F F^H = matrix, clipping negative eigenvalues.
    raises a ValueError if an eigenvalue lies below -PSD_TOL * trace.
    """
    eigvals, eigvecs = np.linalg.eigh(hermitian(matrix))
    if eigvals.size and eigvals.min() < psd_floor(matrix):
        raise ValueError(f'matrix is not PSD: min eigenvalue {eigvals.min():.3e}, '
                         f'trace {np.real(np.trace(matrix)):.3e}')
    eigvals = np.clip(eigvals, 0, None)
    return eigvecs * np.sqrt(eigvals)


def solve_pd(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """ solves matrix @ x = rhs for Hermitian positive definite matrix
    through a Cholesky factorization. raises a ValueError if the
    matrix is not positive definite.
    """
    try:
        factor = scipy.linalg.cho_factor(hermitian(matrix), lower=True)
    except np.linalg.LinAlgError as e:
        raise ValueError(f'matrix is not positive definite: {e}') from e
    return scipy.linalg.cho_solve(factor, rhs)


def eig_ratio(matrix: np.ndarray) -> float:
    """ lambda_2 / lambda_1 of a PSD matrix (0 for rank <= 1 and zero matrices) """
    if matrix.shape[0] < 2:
        return 0.0
    eigvals = np.linalg.eigvalsh(hermitian(matrix))[::-1]
    if eigvals[0] <= 0:
        return 0.0
    return float(max(eigvals[1], 0.0) / eigvals[0])


"""
real embedding of Hermitian matrices
"""


def real_embedding(matrix: np.ndarray) -> np.ndarray:
    """ [[Re H, -Im H], [Im H, Re H]] """
    re, im = np.real(matrix), np.imag(matrix)
    return np.block([[re, -im], [im, re]])


def from_real_embedding(embedded: np.ndarray) -> np.ndarray:
    """ inverse of real_embedding, averaging the redundant blocks """
    n = embedded.shape[0] // 2
    x11, x12 = embedded[:n, :n], embedded[:n, n:]
    x21, x22 = embedded[n:, :n], embedded[n:, n:]
    return 0.5 * (x11 + x22) + 0.5j * (x21 - x12)
