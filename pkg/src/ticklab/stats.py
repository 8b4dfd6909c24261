"""Tick-time distribution and moments.

Notation: ``f(L)`` is the survival function (no tick through step ``L``),
``p(L) = f(L-1) - f(L)`` the tick-time pmf, ``mu`` and ``sigma2`` its mean
and variance and ``R = mu**2 / sigma2`` the accuracy.

Moments come from the resolvent at ``z = 1``::

    mu     = pi0 (1 - T0)^-1 eta
    sigma2 = 2 pi0 (1 - T0)^-2 eta - mu (mu + 1)

evaluated with two linear solves. Quantum clocks use the same identities
on the vectorized no-tick map ``rho -> K0 rho K0^dag``.
"""
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DegenerateParams,
    NegativeProbability,
    NeverTicks,
    NoConvergence,
    RouteMismatch,
    SingularMatrix,
)
from .matkit import adjugate, mat_pow_apply, solve_linear
from .models import ClassicalClock, MulticyclicParams, QuantumClock, QubitParams, build_multicyclic

NEG_CLAMP = 1e-12


class Method(str, Enum):
    RESOLVENT = "resolvent"
    CLOSED_FORM = "closed_form"
    TRUNCATED = "truncated"


@dataclass(frozen=True, eq=False)
class TickStatistics:
    mu: float
    sigma2: float
    method: Method
    pmf_prefix: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def accuracy_infinite(self):
        return self.sigma2 <= 0.0

    @property
    def accuracy(self):
        """``mu**2 / sigma2``, or ``math.inf`` when the variance vanishes."""
        if self.accuracy_infinite:
            return math.inf
        return self.mu**2 / self.sigma2

    def to_dict(self):
        return {
            "mu": self.mu,
            "sigma2": self.sigma2,
            "accuracy": None if self.accuracy_infinite else self.accuracy,
            "accuracy_infinite": self.accuracy_infinite,
            "method": self.method.value,
            "pmf_prefix": [float(x) for x in self.pmf_prefix],
        }


def _clean_variance(mu, sigma2):
    # rounding residue of a deterministic tick time
    if abs(sigma2) <= 1e-12 * max(1.0, mu * mu):
        return 0.0
    return sigma2


def _clamp(p):
    if p < 0.0:
        if p < -NEG_CLAMP:
            raise NegativeProbability(f"p = {p!r}: the model is not a valid clock")
        return 0.0
    return p


# classical --------------------------------------------------------------

def survival_classical(c, L):
    eta = np.ones(c.d)
    return float(mat_pow_apply(c.T0, c.pi0, L) @ eta)


def pmf_classical(c, L):
    if L < 1:
        raise ValueError("L must be >= 1")
    state = mat_pow_apply(c.T0, c.pi0, L - 1)
    return _clamp(float(state @ c.tick_probabilities))


def pmf_series_classical(c, N):
    """Arrays ``p(1..N)`` and ``f(1..N)`` from a single forward pass."""
    tick = c.tick_probabilities
    eta = np.ones(c.d)
    pmf = np.empty(N)
    surv = np.empty(N)
    state = np.array(c.pi0, dtype=float)
    for L in range(N):
        pmf[L] = _clamp(float(state @ tick))
        state = state @ c.T0
        surv[L] = float(state @ eta)
    return pmf, surv


def pmf_multicyclic_closed(p, L):
    """``C(m-1, n-1) (1-q)^n q^(m-n)`` with ``m = ceil(L/k)``, ``n = d/k``.

    Valid for the clock started in the shifted state of
    :func:`ticklab.models.multicyclic_start`.
    """
    n = p.d // p.k
    m = -(-L // p.k)
    if L < 1 or m < n:
        return 0.0
    return math.comb(m - 1, n - 1) * (1.0 - p.q) ** n * p.q ** (m - n)


def _poly_divided_difference(coeffs, x, y):
    # sum_n c_n (x^n - y^n)/(x - y), each term a complete homogeneous sum
    total = 0.0
    for n, c in enumerate(coeffs):
        if n == 0 or c == 0.0:
            continue
        h = sum(x**i * y ** (n - 1 - i) for i in range(n))
        total += c * h
    return total


def pmf_2x2_closed(a, b, c, d, L):
    """Closed-form pmf of the 2-state clock ``[[a, b], [c, d]]`` started in state 1.

    ``p(L)`` is the divided difference over the eigenvalues ``t+, t-`` of
    ``g(t) = t^(L-1) (1 - t)(t - d + b)``. Well separated eigenvalues use the
    two-residue expression; coincident ones use the second-order pole limit
    ``g'(t0)``; the scalar case ``b = c = 0, a = d`` is geometric.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if b == 0.0 and c == 0.0 and a == d:
        return a ** (L - 1) * (1.0 - a)
    delta = (a - d) ** 2 + 4.0 * b * c
    sq = math.sqrt(delta)
    tp = 0.5 * (a + d + sq)
    tm = 0.5 * (a + d - sq)

    def g(t):
        return t ** (L - 1) * (1.0 - t) * (t - d + b)

    if sq == 0.0:
        t0 = tp
        # d/dt [t^(L-1) (1-t) (t-d+b)]
        dg = (L - 1) * t0 ** (L - 2) * (1.0 - t0) * (t0 - d + b) if L > 1 else 0.0
        dg += t0 ** (L - 1) * ((1.0 - t0) - (t0 - d + b))
        return dg
    if sq < 1e-2:
        # g(t) = (t^(L-1))(-t^2 + (1 + d - b) t - (d - b)) as a polynomial in t
        coeffs = np.zeros(L + 2)
        coeffs[L - 1] += -(d - b)
        coeffs[L] += 1.0 + d - b
        coeffs[L + 1] += -1.0
        return _poly_divided_difference(coeffs, tp, tm)
    return (g(tp) - g(tm)) / (tp - tm)


def reachable_states(c):
    """Indices reachable from the support of ``pi0`` through ``T0``."""
    seen = set(np.flatnonzero(c.pi0 > 0).tolist())
    frontier = list(seen)
    while frontier:
        i = frontier.pop()
        for j in np.flatnonzero(c.T0[i] > 0).tolist():
            if j not in seen:
                seen.add(j)
                frontier.append(j)
    return np.array(sorted(seen), dtype=int)


def moments_classical_resolvent(c):
    idx = reachable_states(c)
    T0 = c.T0[np.ix_(idx, idx)]
    pi0 = c.pi0[idx]
    d = len(idx)
    A = np.eye(d) - T0
    try:
        x = solve_linear(A, np.ones(d))
        y = solve_linear(A, x)
    except SingularMatrix as exc:
        raise NeverTicks(f"1 - T0 is singular ({exc}); the clock need not tick") from exc
    mu = float(pi0 @ x)
    if not mu > 0 or not np.all(x >= -1e-9):
        raise NeverTicks(f"resolvent gives mu = {mu!r}; spectral radius of T0 reaches 1")
    sigma2 = _clean_variance(mu, 2.0 * float(pi0 @ y) - mu * (mu + 1.0))
    return TickStatistics(mu, sigma2, Method.RESOLVENT)


def moments_batch(T0):
    """Mean and variance from start state 1 for a stack of no-tick matrices.

    Uses ``(1 - T0)^-1 = adj(1 - T0) / det(1 - T0)``, so it vectorizes over
    the leading axes without per-model solves. Models that never tick come
    out as ``inf`` or ``nan``; no exception is raised.
    """
    T0 = np.asarray(T0, dtype=float)
    d = T0.shape[-1]
    M = np.eye(d) - T0
    adj = adjugate(M)
    det = np.linalg.det(M)
    row = adj[..., 0, :]
    a = row.sum(axis=-1)
    b = np.einsum("...j,...jk->...", row, adj)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = a / det
        sigma2 = 2.0 * b / det**2 - mu * (mu + 1.0)
    return mu, sigma2


def moments_multicyclic_closed(p):
    if p.q >= 1.0:
        raise NeverTicks("q = 1: the multicyclic clock never ticks")
    mu = p.d / (1.0 - p.q)
    sigma2 = p.k * p.d * p.q / (1.0 - p.q) ** 2
    return TickStatistics(mu, sigma2, Method.CLOSED_FORM)


TAIL_WINDOW = 10


def moments_truncated(pmf, survival):
    """Moments from a pmf prefix plus geometric tail bounds.

    ``survival[N-1]`` is ``f(N)``. Decay is measured over blocks of ``w``
    steps, ``rho = max f(L) / f(L - w)`` over the last ten ``L``, so clocks
    whose survival drops only every few steps (cyclic structure, near-swap
    rotations) are handled. With ``f`` nonincreasing this gives
    ``f(N + j) <= C r^j`` where ``C = f(N) / rho`` and ``r = rho^(1/w)``.

    Returns ``(mu, second_moment, tail_mu, tail_second)``.
    """
    pmf = np.asarray(pmf)
    survival = np.asarray(survival)
    N = len(pmf)
    Ls = np.arange(1, N + 1, dtype=float)
    mu = float(Ls @ pmf)
    m2 = float((Ls * Ls) @ pmf)
    fN = float(survival[-1])
    if fN <= 0.0:
        return mu, m2, 0.0, 0.0
    full = np.concatenate(([1.0], survival))
    w = max(1, min(TAIL_WINDOW, N // 2))
    ends = np.arange(max(w, N - 9), N + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(full[ends - w] > 0, full[ends] / full[ends - w], 0.0)
    rho = float(ratios.max())
    if rho >= 1.0 - 1e-6:
        raise NoConvergence(f"survival ratio {rho!r} over {w} steps too close to 1 for a tail bound")
    if rho <= 0.0:
        return mu, m2, 0.0, 0.0
    r = rho ** (1.0 / w)
    C = fN / rho
    # sum_{L>N} L p(L) = N f(N) + sum_{n>=N} f(n)
    tail_mu = N * fN + C / (1.0 - r)
    # sum_{L>N} L^2 p(L) = N^2 f(N) + sum_{n>=N} (2n+1) f(n)
    tail_m2 = N * N * fN + C * ((2.0 * N + 1.0) / (1.0 - r) + 2.0 * r / (1.0 - r) ** 2)
    return mu, m2, tail_mu, tail_m2


def moments_classical_truncated(c, tol=1e-12, horizon_cap=100_000):
    pmf, surv = _series_until(lambda N: pmf_series_classical(c, N), tol, horizon_cap)
    mu, m2, tail_mu, tail_m2 = moments_truncated(pmf, surv)
    return TickStatistics(mu, _clean_variance(mu, m2 - mu * mu), Method.TRUNCATED, pmf), tail_mu, tail_m2


def _series_until(series, tol, horizon_cap):
    N = 64
    while True:
        N = min(N, horizon_cap)
        pmf, surv = series(N)
        if surv[-1] < tol:
            cut = int(np.argmax(surv < tol)) + 1
            return pmf[:cut], surv[:cut]
        if N >= horizon_cap:
            raise NoConvergence(f"survival f({horizon_cap}) = {surv[-1]!r} is not below {tol!r}")
        N *= 4


# quantum ----------------------------------------------------------------

def survival_quantum(qc, L):
    psi = np.array(qc.psi0, dtype=complex)
    for _ in range(L):
        psi = qc.K0 @ psi
    return float(np.vdot(psi, psi).real)


def pmf_quantum(qc, L):
    if L < 1:
        raise ValueError("L must be >= 1")
    psi = np.array(qc.psi0, dtype=complex)
    for _ in range(L - 1):
        psi = qc.K0 @ psi
    before = float(np.vdot(psi, psi).real)
    psi = qc.K0 @ psi
    return _clamp(before - float(np.vdot(psi, psi).real))


def pmf_series_quantum(qc, N):
    pmf = np.empty(N)
    surv = np.empty(N)
    psi = np.array(qc.psi0, dtype=complex)
    prev = float(np.vdot(psi, psi).real)
    for L in range(N):
        psi = qc.K0 @ psi
        cur = float(np.vdot(psi, psi).real)
        pmf[L] = _clamp(prev - cur)
        surv[L] = cur
        prev = cur
    return pmf, surv


def _hermitian_basis(d):
    basis = []
    for j in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[j, j] = 1.0
        basis.append(E)
    for j in range(d):
        for k in range(j + 1, d):
            E = np.zeros((d, d), dtype=complex)
            E[j, k] = E[k, j] = 1.0
            basis.append(E)
            F = np.zeros((d, d), dtype=complex)
            F[j, k] = -1j
            F[k, j] = 1j
            basis.append(F)
    return basis


def _hermitian_coords(rho, d):
    coords = [rho[j, j].real for j in range(d)]
    for j in range(d):
        for k in range(j + 1, d):
            coords.append(rho[j, k].real)
            coords.append(-rho[j, k].imag)
    return np.array(coords)


def no_tick_superoperator(K0):
    """Real ``d^2 x d^2`` matrix of ``rho -> K0 rho K0^dag`` on Hermitian coordinates.

    Coordinates are the diagonal entries followed by ``(Re, -Im)`` of the
    upper off-diagonal entries, so that ``rho = sum_a c_a E_a`` with the
    basis of :func:`_hermitian_basis`. Returns ``(S, w)`` with ``w`` the
    trace functional.
    """
    d = K0.shape[0]
    basis = _hermitian_basis(d)
    S = np.column_stack([_hermitian_coords(K0 @ E @ K0.conj().T, d) for E in basis])
    w = np.concatenate((np.ones(d), np.zeros(d * d - d)))
    return S, w


def moments_quantum_resolvent(qc):
    d = qc.d
    S, w = no_tick_superoperator(qc.K0)
    v = _hermitian_coords(np.outer(qc.psi0, qc.psi0.conj()), d)
    A = np.eye(d * d) - S
    try:
        x = solve_linear(A, v)
        y = solve_linear(A, x)
    except SingularMatrix as exc:
        raise NeverTicks(f"1 - S is singular ({exc}); the clock need not tick") from exc
    mu = float(w @ x)
    if not mu > 0:
        raise NeverTicks(f"resolvent gives mu = {mu!r}")
    sigma2 = _clean_variance(mu, 2.0 * float(w @ y) - mu * (mu + 1.0))
    return TickStatistics(mu, sigma2, Method.RESOLVENT)


def moments_quantum(qc, horizon_cap=100_000, tol=1e-12):
    """Quantum tick moments, cross-checked by two independent routes.

    The superoperator resolvent is authoritative; truncated pmf sums with a
    geometric tail bound must agree with it.

    Raises
    ------
    NoConvergence
        If ``f(horizon_cap) >= tol``.
    RouteMismatch
        If the routes disagree beyond ``1e-6`` plus the tail bound.
    """
    pmf, surv = _series_until(lambda N: pmf_series_quantum(qc, N), tol, horizon_cap)
    mu_t, m2_t, tail_mu, tail_m2 = moments_truncated(pmf, surv)
    stats = moments_quantum_resolvent(qc)
    m2 = stats.sigma2 + stats.mu**2
    if abs(stats.mu - mu_t) > 1e-6 * (1.0 + stats.mu) + tail_mu:
        raise RouteMismatch(f"mu: resolvent {stats.mu!r} vs truncated {mu_t!r}")
    if abs(m2 - m2_t) > 1e-6 * (1.0 + m2) + tail_m2:
        raise RouteMismatch(f"E[L^2]: resolvent {m2!r} vs truncated {m2_t!r}")
    return TickStatistics(stats.mu, stats.sigma2, Method.RESOLVENT, pmf)


def moments_qubit_closed(p):
    """Closed-form mean and variance of the qubit clock.

    With ``a = 1 - q`` and ``b = 1 - u`` (both exact in floating point for
    ``q, u`` in ``[1/2, 1]``)::

        mu     = (a^2 u + 2 b) / (a (1 + q) b)
        sigma2 = (2 q (1 + q^2) b^2 - a^2 c) / (a (1 + q) b)^2,  c = (1 + q^2) b - a^2

    which is the usual rational form rearranged so that the near-cancellation
    along the optimal line ``u = 2q / (1 + q^2)`` (where ``c = 0``) is
    carried by ``c`` alone.
    """
    q, u = p.q, p.u
    if q >= 1.0 or u >= 1.0:
        raise DegenerateParams(f"closed forms undefined at q={q!r}, u={u!r}")
    a = 1.0 - q
    b = 1.0 - u
    den = a * (1.0 + q) * b
    mu = (a * a * u + 2.0 * b) / den
    c = (1.0 + q * q) * b - a * a
    sigma2 = _clean_variance(mu, (2.0 * q * (1.0 + q * q) * b * b - a * a * c) / den**2)
    return TickStatistics(mu, sigma2, Method.CLOSED_FORM)


def tick_statistics(model, pmf_terms=0):
    """Moments of any clock by the resolvent route, with an optional pmf prefix."""
    if isinstance(model, ClassicalClock):
        stats = moments_classical_resolvent(model)
        pmf = pmf_series_classical(model, pmf_terms)[0] if pmf_terms else np.zeros(0)
    elif isinstance(model, QuantumClock):
        stats = moments_quantum_resolvent(model)
        pmf = pmf_series_quantum(model, pmf_terms)[0] if pmf_terms else np.zeros(0)
    else:
        raise TypeError(f"not a clock model: {type(model).__name__}")
    return TickStatistics(stats.mu, stats.sigma2, stats.method, pmf)


def pmf(model, L):
    if isinstance(model, ClassicalClock):
        return pmf_classical(model, L)
    return pmf_quantum(model, L)


def pmf_series(model, N):
    if isinstance(model, ClassicalClock):
        return pmf_series_classical(model, N)
    return pmf_series_quantum(model, N)
