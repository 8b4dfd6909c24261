"""Clock model types and the model zoo.

A classical clock is an initial distribution ``pi0`` and the no-tick
substochastic matrix ``T0``; the tick probability from state ``j`` is the
row deficit ``1 - sum_k T0[j, k]``. A quantum clock is a pure initial
state ``psi0`` and a single no-tick Kraus operator ``K0``.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BlockMismatch, InvariantViolation, NonUnitary, TooShort
from .validation import (
    check_distribution,
    check_kraus,
    check_substochastic,
    check_unit_interval,
    check_unit_vector,
)


@dataclass(frozen=True, eq=False)
class ClassicalClock:
    T0: np.ndarray
    pi0: np.ndarray

    @property
    def d(self):
        return self.T0.shape[0]

    @property
    def tick_probabilities(self):
        return 1.0 - self.T0.sum(axis=1)


@dataclass(frozen=True, eq=False)
class QuantumClock:
    K0: np.ndarray
    psi0: np.ndarray

    @property
    def d(self):
        return self.K0.shape[0]


@dataclass(frozen=True)
class MulticyclicParams:
    d: int
    k: int
    q: float

    @property
    def n(self):
        return self.d // self.k


@dataclass(frozen=True)
class QubitParams:
    q: float
    u: float

    @property
    def theta(self):
        return float(np.arctan2(np.sqrt(1.0 - self.u), np.sqrt(self.u)))


def classical(T0, pi0=None):
    """Build and validate a :class:`ClassicalClock`; ``pi0`` defaults to ``e_1``."""
    T0 = np.array(T0, dtype=float)
    if pi0 is None:
        pi0 = basis_vector(T0.shape[0], 0)
    clock = ClassicalClock(T0, np.array(pi0, dtype=float))
    validate(clock)
    return clock


def quantum(K0, psi0=None):
    K0 = np.array(K0, dtype=complex)
    if psi0 is None:
        psi0 = basis_vector(K0.shape[0], 0).astype(complex)
    clock = QuantumClock(K0, np.array(psi0, dtype=complex))
    validate(clock)
    return clock


def basis_vector(d, i):
    e = np.zeros(d)
    e[i] = 1.0
    return e


def validate(clock):
    """Check the type invariants of a clock; raise InvariantViolation on failure."""
    if isinstance(clock, ClassicalClock):
        check_substochastic(clock.T0)
        check_distribution(clock.pi0, clock.d)
    elif isinstance(clock, QuantumClock):
        check_kraus(clock.K0)
        check_unit_vector(clock.psi0, clock.d)
    else:
        raise InvariantViolation(f"not a clock model: {type(clock).__name__}")


def _check_blocks(d, k):
    if d < 1 or k < 1 or d % k:
        raise BlockMismatch(f"block size k={k} does not divide d={d}")


def multicyclic_matrix(d, k, q):
    _check_blocks(d, k)
    q = check_unit_interval(q, "q")
    T0 = np.zeros((d, d))
    for start in range(0, d, k):
        last = start + k - 1
        for i in range(start, last):
            T0[i, i + 1] = 1.0
        T0[last, start] += q
        if last + 1 < d:
            T0[last, last + 1] = 1.0 - q
    return T0


def multicyclic_start(k, L):
    """Zero-based start state ``s - 1`` with ``L + s - 1 = 0 (mod k)``."""
    return (k - (L % k)) % k


def build_multicyclic(p, L=None):
    """Multicyclic clock with block size ``k``.

    Inside each block the chain moves deterministically to the next state;
    from the last state of a block it cycles back with probability ``q`` or
    moves to the next block with ``1 - q`` (ticks, in the last block).
    With ``L`` given, the initial state is shifted within the first block
    so that a tick at step ``L`` is reachable.
    """
    T0 = multicyclic_matrix(p.d, p.k, p.q)
    start = 0 if L is None else multicyclic_start(p.k, L)
    return ClassicalClock(T0, basis_vector(p.d, start))


def build_oneway(d, q):
    return build_multicyclic(MulticyclicParams(d, 1, q))


def build_cyclic(d, q):
    return build_multicyclic(MulticyclicParams(d, d, q))


def optimal_q_multicyclic(d, k, L):
    _check_blocks(d, k)
    n = d // k
    m = -(-L // k)
    if m < n:
        raise TooShort(f"ceil(L/k) = {m} < d/k = {n}: a tick at L={L} is impossible")
    return 1.0 - n / m


def qubit_kraus(q, u):
    q = check_unit_interval(q, "q")
    u = check_unit_interval(u, "u")
    a, b = np.sqrt(u), np.sqrt(1.0 - u)
    U0 = np.array([[a, b], [-b, a]])
    return (U0 @ np.diag([1.0, q])).astype(complex)


def build_qubit(p):
    """Qubit clock ``K0 = U0 sqrt(E0)`` with ``E0 = diag(1, q^2)``, started in ``|0>``."""
    return QuantumClock(qubit_kraus(p.q, p.u), np.array([1.0, 0.0], dtype=complex))


def qutrit_unitary(u):
    u = check_unit_interval(u, "u")
    s = 2.0 * np.sqrt(3.0 * u * (1.0 - u))
    a = 4.0 * u - 1.0
    b = 2.0 * (1.0 - u) + s
    c = 2.0 * (1.0 - u) - s
    U = np.array([[a, b, c], [c, a, b], [b, c, a]]) / 3.0
    err = np.abs(U.T @ U - np.eye(3)).max()
    if err > 1e-10:
        raise NonUnitary(f"qutrit rotation deviates from unitarity by {err:.3e}")
    return U


def build_qutrit(q, u, orientation="ladder"):
    """Qutrit clock ``K0 = U sqrt(E0)`` with ``E0 = diag(1, 1, q^2)``, started in ``|0>``.

    ``orientation="ladder"`` uses the transpose of the circulant so that
    amplitude flows ``|0> -> |1> -> |2>`` before reaching the damped level;
    ``"circulant"`` uses the matrix as written, which sends ``|0>`` towards
    ``|2>`` first.
    """
    q = check_unit_interval(q, "q")
    U = qutrit_unitary(u)
    if orientation == "ladder":
        U = U.T
    elif orientation != "circulant":
        raise ValueError(f"unknown orientation {orientation!r}")
    K0 = (U @ np.diag([1.0, 1.0, q])).astype(complex)
    return QuantumClock(K0, np.array([1.0, 0.0, 0.0], dtype=complex))


# JSON (de)serialization --------------------------------------------------

def _flat(a):
    return [float(x) for x in np.asarray(a).ravel()]


def _matrix(entries, d, dtype=float):
    a = np.asarray(entries, dtype=dtype)
    if a.ndim == 1:
        if a.size != d * d:
            raise InvariantViolation(f"expected {d * d} matrix entries, got {a.size}")
        a = a.reshape(d, d)
    if a.shape != (d, d):
        raise InvariantViolation(f"expected a {d}x{d} matrix, got shape {a.shape}")
    return a


def to_dict(clock):
    if isinstance(clock, ClassicalClock):
        return {"kind": "classical", "d": clock.d, "T0": _flat(clock.T0), "pi0": _flat(clock.pi0)}
    if isinstance(clock, QuantumClock):
        return {
            "kind": "quantum",
            "d": clock.d,
            "K0_re": _flat(clock.K0.real),
            "K0_im": _flat(clock.K0.imag),
            "psi0_re": _flat(clock.psi0.real),
            "psi0_im": _flat(clock.psi0.imag),
        }
    raise TypeError(f"cannot serialize {type(clock).__name__}")


_ALLOWED_KEYS = {
    "classical": {"kind", "d", "T0", "pi0"},
    "quantum": {"kind", "d", "K0_re", "K0_im", "psi0_re", "psi0_im"},
    "multicyclic": {"kind", "d", "k", "q", "L"},
    "oneway": {"kind", "d", "q", "L"},
    "cyclic": {"kind", "d", "q", "L"},
    "qubit": {"kind", "q", "u"},
    "qutrit": {"kind", "q", "u"},
}


def from_dict(spec):
    """Inverse of :func:`to_dict`; also accepts zoo shorthands such as
    ``{"kind": "multicyclic", "d": 4, "k": 2, "q": 0.5}``."""
    kind = spec.get("kind")
    if kind not in _ALLOWED_KEYS:
        raise InvariantViolation(f"unknown model kind {kind!r}")
    unknown = set(spec) - _ALLOWED_KEYS[kind]
    if unknown:
        raise InvariantViolation(f"unknown keys for {kind} model: {sorted(unknown)}")
    if kind == "classical":
        d = int(spec["d"])
        pi0 = spec.get("pi0")
        return classical(_matrix(spec["T0"], d), pi0)
    if kind == "quantum":
        d = int(spec["d"])
        K0 = _matrix(spec["K0_re"], d) + 1j * _matrix(spec.get("K0_im", [0.0] * d * d), d)
        psi = np.asarray(spec["psi0_re"], float) + 1j * np.asarray(spec.get("psi0_im", [0.0] * d), float)
        return quantum(K0, psi)
    if kind in ("multicyclic", "oneway", "cyclic"):
        d = int(spec["d"])
        k = {"oneway": 1, "cyclic": d}.get(kind, spec.get("k"))
        clock = build_multicyclic(MulticyclicParams(d, int(k), float(spec["q"])), spec.get("L"))
    elif kind == "qubit":
        clock = build_qubit(QubitParams(float(spec["q"]), float(spec["u"])))
    else:
        clock = build_qutrit(float(spec["q"]), float(spec["u"]))
    validate(clock)
    return clock


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))
