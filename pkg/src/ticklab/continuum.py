"""Continuous-time limits of discrete clock families.

A family ``delta -> clock`` has a continuous limit when the one-step
no-tick operator behaves like ``exp(delta G)`` for small ``delta``.
Classical generators are read off from ``(T0 - 1) / delta``; quantum ones
from ``log(K0) / delta``, which separates into ``-V + iH`` with ``V``
positive semidefinite (decay) and ``H`` Hermitian (coherent rotation).
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InvariantViolation, NeverTicks, SingularMatrix
from .matkit import logm_2x2, solve_linear
from .models import ClassicalClock, QuantumClock, QubitParams, basis_vector, build_qubit, multicyclic_matrix
from .stats import Method, TickStatistics, _clean_variance

GENERATOR_TOL = 1e-12
PSD_TOL = 1e-10

LIMIT_EXISTS = "limit exists"
NO_LIMIT = "no continuous limit"


@dataclass(frozen=True, eq=False)
class ClassicalGenerator:
    A0: np.ndarray
    tol: float = GENERATOR_TOL

    def __post_init__(self):
        A = np.asarray(self.A0, dtype=float)
        off = A - np.diag(np.diag(A))
        if off.min() < -self.tol:
            raise InvariantViolation(f"generator has negative off-diagonal entry {off.min()!r}")
        if A.sum(axis=1).max() > self.tol:
            raise InvariantViolation(f"generator row sum {A.sum(axis=1).max()!r} > 0")
        object.__setattr__(self, "A0", A)

    @property
    def d(self):
        return self.A0.shape[0]


@dataclass(frozen=True, eq=False)
class QuantumGenerator:
    G: np.ndarray
    tol: float = PSD_TOL

    def __post_init__(self):
        object.__setattr__(self, "G", np.asarray(self.G, dtype=complex))
        low = np.linalg.eigvalsh(self.V).min()
        if low < -self.tol:
            raise InvariantViolation(f"decay part V has negative eigenvalue {low!r}")

    @property
    def V(self):
        return -(self.G + self.G.conj().T) / 2.0

    @property
    def H(self):
        return (self.G - self.G.conj().T) / 2j


def ladder_generator(d, alpha=1.0):
    """Bidiagonal generator: rate ``alpha`` along the ladder, ticking from the top."""
    return ClassicalGenerator(alpha * (np.eye(d, k=1) - np.eye(d)))


def continuous_moments_classical(g, pi0=None):
    """Mean and variance of the first tick time of ``pi0 exp(t A0)``.

    ``mu = pi0 (-A0)^-1 1`` and ``E[T^2] = 2 pi0 (-A0)^-2 1``.
    """
    A = g.A0
    d = A.shape[0]
    pi0 = basis_vector(d, 0) if pi0 is None else np.asarray(pi0, dtype=float)
    try:
        x = solve_linear(-A, np.ones(d))
        y = solve_linear(-A, x)
    except SingularMatrix as exc:
        raise NeverTicks(f"generator is singular: {exc}") from exc
    mu = float(pi0 @ x)
    second = 2.0 * float(pi0 @ y)
    if not np.isfinite(mu) or mu <= 0:
        raise NeverTicks(f"mean tick time {mu!r} is not positive and finite")
    return TickStatistics(mu, _clean_variance(mu, second - mu * mu), Method.RESOLVENT)


@dataclass
class LimitReport:
    """Per-step quotients, their deviations from the extrapolated limit and a verdict."""

    deltas: list
    quotients: list
    deviations: list
    successive_differences: list
    limit: np.ndarray
    verdict: str
    extrapolation_error: float = 0.0
    generator: object = None
    notes: list = field(default_factory=list)

    @property
    def exists(self):
        return self.verdict == LIMIT_EXISTS

    def to_dict(self):
        def mat(M):
            M = np.asarray(M)
            if np.iscomplexobj(M):
                return {"re": M.real.tolist(), "im": M.imag.tolist()}
            return M.tolist()

        return {
            "verdict": self.verdict,
            "deltas": list(self.deltas),
            "quotients": [mat(Q) for Q in self.quotients],
            "deviations": list(self.deviations),
            "successive_differences": list(self.successive_differences),
            "limit": mat(self.limit),
            "extrapolation_error": self.extrapolation_error,
            "notes": list(self.notes),
        }


def _extrapolate(deltas, quotients):
    """Verdict and first-order Richardson limit from quotients at decreasing steps."""
    if len(deltas) < 3:
        raise ValueError("at least three step sizes are needed to judge convergence")
    if any(b >= a for a, b in zip(deltas, deltas[1:])) or deltas[-1] <= 0:
        raise ValueError("deltas must be positive and strictly decreasing")
    diffs = [float(np.abs(b - a).max()) for a, b in zip(quotients, quotients[1:])]
    scale = max(1.0, max(float(np.abs(Q).max()) for Q in quotients))
    settled = max(diffs) <= 1e-12 * scale
    shrinking = all(b <= a * (1.0 + 1e-9) for a, b in zip(diffs, diffs[1:]))
    limit = _richardson(deltas[-2], deltas[-1], quotients[-2], quotients[-1])
    # a-posteriori error: disagreement with the extrapolant of the previous pair
    previous = _richardson(deltas[-3], deltas[-2], quotients[-3], quotients[-2])
    error = float(np.abs(limit - previous).max())
    deviations = [float(np.abs(Q - limit).max()) for Q in quotients]
    verdict = LIMIT_EXISTS if (settled or shrinking) else NO_LIMIT
    return limit, deviations, diffs, verdict, error


def _richardson(d1, d2, Q1, Q2):
    return (d1 * Q2 - d2 * Q1) / (d1 - d2)


def classical_generator_limit(family, deltas):
    """Extract ``A0 = lim (T0(delta) - 1) / delta`` from a classical family."""
    deltas = [float(x) for x in deltas]
    quotients = []
    for delta in deltas:
        T0 = np.asarray(family(delta).T0, dtype=float)
        quotients.append((T0 - np.eye(T0.shape[0])) / delta)
    limit, deviations, diffs, verdict, error = _extrapolate(deltas, quotients)
    report = LimitReport(deltas, quotients, deviations, diffs, limit, verdict, error)
    if report.exists:
        try:
            report.generator = ClassicalGenerator(limit, max(GENERATOR_TOL, error))
        except InvariantViolation as exc:
            report.verdict = NO_LIMIT
            report.notes.append(f"extrapolated matrix is not a generator: {exc}")
    return report


def _logm(K):
    if K.shape == (2, 2):
        return logm_2x2(K)
    return scipy.linalg.logm(K)


def quantum_generator_limit(family, deltas):
    """Extract ``G = lim log(K0(delta)) / delta`` and split it into ``-V + iH``."""
    deltas = [float(x) for x in deltas]
    quotients = [_logm(np.asarray(family(delta).K0, dtype=complex)) / delta for delta in deltas]
    limit, deviations, diffs, verdict, error = _extrapolate(deltas, quotients)
    report = LimitReport(deltas, quotients, deviations, diffs, limit, verdict, error)
    if report.exists:
        try:
            report.generator = QuantumGenerator(limit, max(PSD_TOL, error))
        except InvariantViolation as exc:
            report.verdict = NO_LIMIT
            report.notes.append(f"extrapolated generator is not dissipative: {exc}")
    return report


# families ---------------------------------------------------------------

def oneway_family(d, alpha=1.0):
    """One-way ladder with advance probability ``alpha * delta`` per step."""

    def family(delta):
        T0 = multicyclic_matrix(d, 1, 1.0 - alpha * delta)
        return ClassicalClock(T0, basis_vector(d, 0))

    return family


def cyclic_family(d, q=0.5):
    """The cyclic clock at every step size: no time scale to shrink."""

    def family(delta):
        return ClassicalClock(multicyclic_matrix(d, d, q), basis_vector(d, 0))

    return family


def identity_family(d):
    def family(delta):
        return ClassicalClock(np.eye(d), basis_vector(d, 0))

    return family


def qubit_family():
    """Qubit clocks on the optimal line ``q = 1 - delta``, ``u = 2q / (1 + q^2)``."""

    def family(delta):
        q = 1.0 - delta
        return build_qubit(QubitParams(q, 2.0 * q / (1.0 + q * q)))

    return family


def quantum_identity_family(d):
    def family(delta):
        return QuantumClock(np.eye(d, dtype=complex), basis_vector(d, 0).astype(complex))

    return family


def qubit_limit_generator():
    """Limit of :func:`qubit_family`: decay on level 1, rotation ``sigma_y / sqrt(2)``.

    With level 1 as the damped level this is ``-(1 - sigma_z)/2 + i sigma_y / sqrt(2)``.
    """
    r = 1.0 / np.sqrt(2.0)
    return np.array([[0.0, r], [-r, -1.0]], dtype=complex)
