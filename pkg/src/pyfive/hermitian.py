"""Dense complex Hermitian linear algebra.

Every function takes a single M x M matrix or a stack of them with shape (..., M, M), so the
per-frequency work of the extraction is done in one call. A Cholesky factor is the upper
triangular q with a = q^H q.
"""
import logging
from typing import NamedTuple

import numpy as np
import sympy
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import zpotrf

from .exceptions import NotPositiveDefiniteError, EigenConvergenceError, SingularTriangularError

logger = logging.getLogger(__name__)

PIVOT_TOLERANCE = 1e-12
HERMITIAN_TOLERANCE = 1e-8


class EigenDecomposition(NamedTuple):
    """Eigenvalues in descending order, eigenvectors in the matching columns."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _square(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError('expected square matrices, got shape {}'.format(a.shape))
    return a


def conj_transpose(a):
    return np.conj(np.swapaxes(a, -1, -2))


def hermitian_part(a):
    """(a + a^H) / 2, after checking a is Hermitian up to rounding."""
    a = _square(a)
    ah = conj_transpose(a)
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale and np.max(np.abs(a - ah)) > HERMITIAN_TOLERANCE * scale:
        raise ValueError('matrix is not Hermitian')
    return (a + ah) / 2


def _stack_index(batch_shape, flat):
    if not batch_shape:
        return None
    index = np.unravel_index(flat, batch_shape)
    return int(index[0]) if len(index) == 1 else tuple(int(i) for i in index)


def _locate_failure(a, tolerance):
    """Find the first matrix and pivot where the factorization breaks down. Raises."""
    batch_shape = a.shape[:-2]
    flat = a.reshape((-1,) + a.shape[-2:])
    for ii, matrix in enumerate(flat):
        diag = np.real(np.diagonal(matrix))
        threshold = tolerance * max(diag.max(), 0.0)
        factor, info = zpotrf(matrix, lower=0, clean=1)
        if info > 0:
            raise NotPositiveDefiniteError(info - 1, _stack_index(batch_shape, ii), float(np.real(factor[info - 1, info - 1])))
        pivots = np.real(np.diagonal(factor)) ** 2
        bad = np.nonzero(pivots <= threshold)[0]
        if len(bad):
            raise NotPositiveDefiniteError(int(bad[0]), _stack_index(batch_shape, ii), float(pivots[bad[0]]))
    raise NotPositiveDefiniteError(0)


def cholesky(a, tolerance=PIVOT_TOLERANCE):
    """Upper triangular q with positive real diagonal such that q^H q = a.
       A squared pivot at or below tolerance * max diagonal means a is not positive definite."""
    a = hermitian_part(a)
    try:
        q = conj_transpose(np.linalg.cholesky(a))
    except np.linalg.LinAlgError:
        _locate_failure(a, tolerance)
    diag = np.real(np.diagonal(a, axis1=-2, axis2=-1))
    pivots = np.real(np.diagonal(q, axis1=-2, axis2=-1)) ** 2
    if np.any(pivots <= tolerance * np.maximum(diag.max(axis=-1), 0.0)[..., None]):
        _locate_failure(a, tolerance)
    return q


def _fix_phase(vectors):
    """Rotate each column so its largest magnitude entry is real and positive."""
    rows = np.argmax(np.abs(vectors), axis=-2)[..., None, :]
    peak = np.take_along_axis(vectors, rows, axis=-2)
    return vectors * (np.abs(peak) / peak)


def eig_hermitian(a):
    """Full eigendecomposition, eigenvalues descending, eigenvector phase fixed."""
    a = hermitian_part(a)
    try:
        values, vectors = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError('eigendecomposition did not converge: {}'.format(exc)) from exc
    return EigenDecomposition(values[..., ::-1].copy(), _fix_phase(vectors[..., ::-1]))


def smallest_eigenpair(a):
    """(smallest eigenvalue, unit eigenvector) of each matrix."""
    values, vectors = eig_hermitian(a)
    return values[..., -1], vectors[..., :, -1]


def _check_diagonal(q, tolerance):
    diag = np.abs(np.diagonal(q, axis1=-2, axis2=-1))
    scale = diag.max(axis=-1, keepdims=True)
    if np.any(diag <= tolerance * scale) or not np.all(scale > 0):
        raise SingularTriangularError('triangular factor has a (near) zero diagonal entry')


def _triangular_solve(q, b, trans, tolerance):
    q = _square(q)
    b = np.asarray(b, dtype=complex)
    _check_diagonal(q, tolerance)
    vector = b.ndim == q.ndim - 1
    if not vector and b.ndim != q.ndim:
        raise ValueError('right hand side of shape {} does not match factor {}'.format(b.shape, q.shape))
    if q.ndim == 2:
        return solve_triangular(q, b, trans=trans, lower=False, check_finite=False)
    matrix = q if trans == 'N' else conj_transpose(q)
    if vector:
        return np.linalg.solve(matrix, b[..., None])[..., 0]
    return np.linalg.solve(matrix, b)


def solve_upper_triangular(q, b, tolerance=PIVOT_TOLERANCE):
    """x with q x = b. b is a vector (..., M) or a block of columns (..., M, K)."""
    return _triangular_solve(q, b, 'N', tolerance)


def apply_inverse_hermitian_transpose(q, x, tolerance=PIVOT_TOLERANCE):
    """y with q^H y = x, i.e. y = q^{-H} x."""
    return _triangular_solve(q, x, 'C', tolerance)


def characteristic_eigenvalues(a, digits=30):
    """Eigenvalues of one small Hermitian matrix as roots of its characteristic polynomial, descending.
       Slow, meant as an independent check of eig_hermitian."""
    a = hermitian_part(a)
    if a.ndim != 2:
        raise ValueError('characteristic_eigenvalues takes a single matrix')
    matrix = sympy.Matrix([[sympy.Float(v.real, digits) + sympy.I * sympy.Float(v.imag, digits) for v in row]
                           for row in a])
    lam = sympy.symbols('lam')
    # real coefficients for a Hermitian matrix, up to rounding
    coeffs = [sympy.re(coeff) for coeff in matrix.charpoly(lam).all_coeffs()]
    roots = sympy.Poly(coeffs, lam).nroots(n=15, maxsteps=200)
    return np.array(sorted((float(sympy.re(root)) for root in roots), reverse=True))
