"""Input validation helpers in the spirit of ``sklearn.utils.validation``.

Each ``check_*`` function returns a cleaned numpy array or raises
:class:`~ticklab.errors.InvariantViolation` naming the first failed
condition.
"""
import numpy as np

from .errors import InvariantViolation

ROW_SUM_TOL = 1e-12
NORM_TOL = 1e-12
KRAUS_TOL = 1e-10


def check_square(M, name="matrix", dtype=float):
    M = np.asarray(M, dtype=dtype)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InvariantViolation(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvariantViolation(f"{name} has non-finite entries")
    return M


def check_substochastic(T0, name="T0"):
    """Nonnegative entries and row sums at most one."""
    T0 = check_square(T0, name)
    if T0.min() < 0:
        i, j = np.unravel_index(np.argmin(T0), T0.shape)
        raise InvariantViolation(f"{name}[{i},{j}] = {T0[i, j]!r} is negative")
    sums = T0.sum(axis=1)
    if sums.max() > 1.0 + ROW_SUM_TOL:
        i = int(np.argmax(sums))
        raise InvariantViolation(f"row {i} of {name} sums to {sums[i]!r} > 1")
    return T0


def check_distribution(p, d, name="pi0"):
    p = np.asarray(p, dtype=float)
    if p.shape != (d,):
        raise InvariantViolation(f"{name} must have length {d}, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or p.min() < 0:
        raise InvariantViolation(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > NORM_TOL:
        raise InvariantViolation(f"{name} sums to {p.sum()!r}, not 1")
    return p


def check_kraus(K0, name="K0"):
    """Largest singular value at most one (``1 - K0^dag K0`` is PSD)."""
    K0 = check_square(K0, name, dtype=complex)
    smax = np.linalg.svd(K0, compute_uv=False)[0]
    if smax > 1.0 + KRAUS_TOL:
        raise InvariantViolation(f"largest singular value of {name} is {smax!r} > 1")
    return K0


def check_unit_vector(psi, d, name="psi0"):
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (d,):
        raise InvariantViolation(f"{name} must have length {d}, got shape {psi.shape}")
    norm = np.linalg.norm(psi)
    if not np.isfinite(norm) or abs(norm - 1.0) > NORM_TOL:
        raise InvariantViolation(f"{name} has norm {norm!r}, not 1")
    return psi


def check_unit_interval(x, name):
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise InvariantViolation(f"{name} = {x!r} is outside [0, 1]")
    return x
