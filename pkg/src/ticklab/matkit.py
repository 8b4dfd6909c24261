"""Small dense matrix kernel.

Everything here works on plain numpy arrays of modest size (d <= 10). No
general inverse is offered: resolvents are always obtained through
:func:`solve_linear`, which reports near-singular systems instead of
silently returning garbage.
"""
import math
import warnings

import numpy as np
import scipy.linalg

from .errors import BranchCutHit, SingularMatrix

_PIVOT_RTOL = 1e-14
_EXPM_DEGREE = 13
_EXPM_NORM_TARGET = 0.5


def solve_linear(A, b):
    """Solve ``A x = b`` by LU with partial pivoting.

    Raises
    ------
    SingularMatrix
        If a pivot falls below ``1e-14 * ||A||_inf``.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"b has length {b.shape[0]}, expected {A.shape[0]}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite entries in linear system")

    scale = np.abs(A).sum(axis=1).max()
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < _PIVOT_RTOL * scale:
        raise SingularMatrix(
            f"pivot {pivots.min():.3e} below {_PIVOT_RTOL:g} * ||A||_inf = {scale:.3e}"
        )
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def mat_pow_apply(M, v, L):
    """Return the row vector ``v @ M**L`` by ``L`` successive products."""
    if L < 0:
        raise ValueError("L must be nonnegative")
    M = np.asarray(M)
    out = np.array(v, dtype=np.result_type(M, np.asarray(v), float), copy=True)
    for _ in range(L):
        out = out @ M
    return out


def expm(M):
    """Matrix exponential by scaling and squaring of a degree-13 Taylor series.

    The matrix is scaled by ``2**-s`` so that its 1-norm is at most 0.5,
    where the truncated series is accurate to double precision, and the
    result is squared ``s`` times.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {M.shape}")
    dtype = np.result_type(M, float)
    n = M.shape[0]
    norm = np.abs(M).sum(axis=0).max() if n else 0.0
    s = 0
    if norm > _EXPM_NORM_TARGET:
        s = int(math.ceil(math.log2(norm / _EXPM_NORM_TARGET)))
    A = M.astype(dtype) / (2.0**s)

    # Horner evaluation of sum_{j<=13} A^j / j!
    result = np.eye(n, dtype=dtype)
    for j in range(_EXPM_DEGREE, 0, -1):
        result = np.eye(n, dtype=dtype) + (A @ result) / j
    for _ in range(s):
        result = result @ result
    return result


def _principal_log(z):
    z = complex(z)
    if z == 0:
        raise BranchCutHit("zero eigenvalue: logarithm undefined")
    if z.real < 0 and abs(z.imag) <= 1e-12 * max(1.0, abs(z)):
        raise BranchCutHit(f"eigenvalue {z} lies on the negative real axis")
    return np.log(z)


def logm_2x2(M):
    """Principal logarithm of a 2x2 matrix.

    Uses the two-point interpolation formula
    ``log M = a I + b M`` where ``b`` is the divided difference of ``log``
    over the eigenvalues; coincident eigenvalues fall back to the
    derivative (the Jordan-block limit), which also covers defective
    matrices.
    """
    M = np.asarray(M, dtype=complex)
    if M.shape != (2, 2):
        raise ValueError(f"logm_2x2 needs a 2x2 matrix, got shape {M.shape}")
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = np.sqrt(tr * tr - 4.0 * det + 0j)
    lam1 = (tr + disc) / 2.0
    lam2 = (tr - disc) / 2.0
    # the root with smaller modulus is better computed from the product
    if abs(lam1) >= abs(lam2) and lam1 != 0:
        lam2 = det / lam1
    elif lam2 != 0:
        lam1 = det / lam2
    log1 = _principal_log(lam1)
    log2 = _principal_log(lam2)

    gap = lam1 - lam2
    scale = max(abs(lam1), abs(lam2))
    I = np.eye(2, dtype=complex)
    if abs(gap) <= 1e-14 * scale:
        lam = tr / 2.0
        return _principal_log(lam) * I + (M - lam * I) / lam

    if abs(gap) < 0.5 * scale:
        # log(l1) - log(l2) = 2 atanh(z) + 2 pi i k; stable for close eigenvalues
        z = gap / (lam1 + lam2)
        base = 2.0 * np.arctanh(z)
        k = np.round(((log1 - log2) - base).imag / (2.0 * np.pi))
        dd = (base + 2j * np.pi * k) / gap
    else:
        dd = (log1 - log2) / gap
    a = log1 - dd * lam1
    return a * I + dd * M


def _cofactor_adjugate(M):
    d = M.shape[-1]
    if d == 1:
        return np.ones_like(M)
    idx = np.arange(d)
    adj = np.empty_like(M)
    for i in range(d):
        cols = idx[idx != i]
        for j in range(d):
            rows = idx[idx != j]
            minor = M[..., rows[:, None], cols[None, :]]
            adj[..., i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return adj


def adjugate(M):
    """Adjugate (classical adjoint) of a square matrix or a stack of them.

    ``adj(M)[i, j] = (-1)**(i+j) * det(M with row j and column i removed)``.
    Up to 4x4 this is evaluated from the minors directly; larger matrices
    use ``det(M) * inv(M)`` unless they are close to singular.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"adjugate needs square matrices, got shape {M.shape}")
    d = M.shape[-1]
    if d > 10:
        raise ValueError("adjugate is limited to d <= 10")
    if d <= 4:
        return _cofactor_adjugate(M)
    cond = np.linalg.cond(M)
    if np.all(np.isfinite(cond)) and np.all(cond < 1e10):
        det = np.linalg.det(M)
        return det[..., None, None] * np.linalg.inv(M)
    return _cofactor_adjugate(M)
