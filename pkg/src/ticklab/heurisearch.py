"""Heuristic search over classical clocks with a squared parametrization.

Two unconstrained real matrices ``B0, B1`` map onto a substochastic
no-tick matrix through

    T0[i, j] = B0[i, j]^2 / sum_j (B0[i, j]^2 + B1[i, j]^2),

so plain gradient methods can roam freely. Parameters are stored as arrays
of shape ``(..., 2, d, d)``; every function here is vectorized over the
leading axes, which is how independent restarts are batched.

Objectives are callables ``B -> (values, grads)`` to be *minimized*.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .certbound import grad_pL, pL_batch
from .matkit import adjugate
from .models import ClassicalClock, basis_vector
from .stats import moments_batch

FD_STEP = 1e-7


def project(B):
    """No-tick matrices ``T0`` for a stack of parameters ``B`` (shape ``(..., 2, d, d)``)."""
    B = np.asarray(B, dtype=float)
    sq0 = B[..., 0, :, :] ** 2
    norm = sq0.sum(axis=-1) + (B[..., 1, :, :] ** 2).sum(axis=-1)
    safe = np.where(norm > 0, norm, 1.0)
    return np.where(norm[..., None] > 0, sq0 / safe[..., None], 0.0)


def project_clock(B):
    T0 = project(B)
    if T0.ndim != 2:
        raise ValueError("project_clock expects a single parameter set of shape (2, d, d)")
    return ClassicalClock(T0, basis_vector(T0.shape[0], 0))


def _projection_pullback(B, T0, g):
    """Chain rule from ``dObj/dT0`` to ``dObj/dB`` through :func:`project`."""
    B0, B1 = B[..., 0, :, :], B[..., 1, :, :]
    norm = (B0**2).sum(axis=-1) + (B1**2).sum(axis=-1)
    # subnormal normalizers would overflow 1/norm; treat those rows as zero rows
    ok = norm > np.finfo(float).tiny
    inv = np.where(ok, 1.0 / np.where(ok, norm, 1.0), 0.0)[..., None]
    weighted = (g * T0).sum(axis=-1, keepdims=True)
    out = np.empty_like(B)
    out[..., 0, :, :] = 2.0 * B0 * inv * (g - weighted)
    out[..., 1, :, :] = -2.0 * B1 * inv * weighted
    return out


def objective_G(B, L):
    """``p(L)`` of the projected clock (start state 1) and its exact gradient in ``B``."""
    B = np.asarray(B, dtype=float)
    T0 = project(B)
    flat = T0.reshape(-1, *T0.shape[-2:])
    value = pL_batch(flat, L).reshape(T0.shape[:-2])
    grad = _projection_pullback(B, T0, grad_pL(T0, L))
    return value, grad


def F_value(T0):
    """``2d pi adj(1-T0)^2 eta - (d+1) (pi adj(1-T0) eta)^2`` with ``pi = e_1``.

    Equals ``-(mu (mu - d) - d sigma2) det(1 - T0)^2`` whenever the
    resolvent exists, and stays finite when it does not.
    """
    T0 = np.asarray(T0, dtype=float)
    d = T0.shape[-1]
    adj = adjugate(np.eye(d) - T0)
    row = adj[..., 0, :]
    first = row.sum(axis=-1)
    second = np.einsum("...j,...jk->...", row, adj)
    return 2.0 * d * second - (d + 1) * first**2


def objective_F(B, d=None):
    """``F`` of the projected clock with a central-difference gradient (step 1e-7)."""
    B = np.asarray(B, dtype=float)
    if d is not None and B.shape[-1] != d:
        raise ValueError(f"parameters are for d={B.shape[-1]}, not d={d}")
    value = F_value(project(B))
    n = int(np.prod(B.shape[-3:]))
    lead = B.shape[:-3]
    flatB = B.reshape(*lead, n)
    eye = np.eye(n) * FD_STEP
    plus = (flatB[..., None, :] + eye).reshape(*lead, n, *B.shape[-3:])
    minus = (flatB[..., None, :] - eye).reshape(*lead, n, *B.shape[-3:])
    diff = (F_value(project(plus)) - F_value(project(minus))) / (2.0 * FD_STEP)
    return value, diff.reshape(B.shape)


def neg_G(L):
    """Minimization objective ``-p(L)``."""

    def objective(B):
        value, grad = objective_G(B, L)
        return -value, -grad

    objective.label = f"-p({L})"
    return objective


def F_objective():
    def objective(B):
        return objective_F(B)

    objective.label = "F"
    return objective


def variance_at_mean_objective(mu_target, weight=100.0):
    """Penalty objective ``sigma2 / mu*^2 + weight ((mu - mu*) / mu*)^2``.

    At a fixed mean, maximizing the accuracy ``mu^2 / sigma2`` is the same
    as minimizing the variance; penalizing the variance (rather than
    rewarding ``R``) keeps the search away from the deterministic clocks,
    where ``R`` diverges at the wrong mean. Non-ticking points evaluate to
    a large constant. Gradients are central differences.
    """

    def value(B):
        mu, sigma2 = moments_batch(project(B))
        with np.errstate(invalid="ignore", over="ignore"):
            out = sigma2 / mu_target**2 + weight * ((mu - mu_target) / mu_target) ** 2
        return np.where(np.isfinite(out) & (mu > 0), out, 1e6)

    def objective(B):
        B = np.asarray(B, dtype=float)
        n = int(np.prod(B.shape[-3:]))
        lead = B.shape[:-3]
        flatB = B.reshape(*lead, n)
        eye = np.eye(n) * FD_STEP
        plus = (flatB[..., None, :] + eye).reshape(*lead, n, *B.shape[-3:])
        minus = (flatB[..., None, :] - eye).reshape(*lead, n, *B.shape[-3:])
        grad = (value(plus) - value(minus)) / (2.0 * FD_STEP)
        grad = np.where(np.abs(grad) < 1e8, grad, 0.0)
        return value(B), grad.reshape(B.shape)

    objective.label = f"variance at mu={mu_target}"
    return objective


@dataclass
class SearchResult:
    best_objective: float
    best_T0: np.ndarray
    restarts: int
    steps: int
    learning_rate: float
    seed: int
    objective_trace_summary: list = field(default_factory=list)
    objective_label: str = ""
    final_T0: np.ndarray = None

    @property
    def best_clock(self):
        return ClassicalClock(self.best_T0, basis_vector(self.best_T0.shape[0], 0))

    def to_dict(self):
        return {
            "best_objective": self.best_objective,
            "best_T0": self.best_T0.tolist(),
            "restarts": self.restarts,
            "steps": self.steps,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "objective": self.objective_label,
            "objective_trace_summary": [list(pair) for pair in self.objective_trace_summary],
        }


def initial_parameters(d, restarts, seed):
    """Standard Gaussian starting points, one generator per restart."""
    return np.stack([np.random.default_rng([seed, i]).standard_normal((2, d, d)) for i in range(restarts)])


def _adam_batch(objective, B, steps, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    m = np.zeros_like(B)
    v = np.zeros_like(B)
    initial, _ = objective(B)
    for t in range(1, steps + 1):
        _, g = objective(B)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        mhat = m / (1.0 - beta1**t)
        vhat = v / (1.0 - beta2**t)
        B = B - lr * mhat / (np.sqrt(vhat) + eps)
    final, _ = objective(B)
    return B, np.asarray(initial, float), np.asarray(final, float)


def adam_minimize(objective, d, restarts=100, steps=10_000, lr=0.005, seed=0, threads=1):
    """Full-batch Adam from independent Gaussian starts; keep the best final value.

    Restarts are split across ``threads`` workers; each restart depends only
    on ``(seed, restart index)``, so the result does not depend on the
    thread count.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if lr <= 0:
        raise ValueError("lr must be positive")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    B0 = initial_parameters(d, restarts, seed)
    groups = np.array_split(np.arange(restarts), max(1, min(threads, restarts)))
    with ThreadPoolExecutor(max_workers=len(groups)) as pool:
        parts = list(pool.map(lambda idx: _adam_batch(objective, B0[idx], steps, lr), groups))
    B = np.concatenate([p[0] for p in parts])
    initial = np.concatenate([p[1] for p in parts])
    final = np.concatenate([p[2] for p in parts])
    finite = np.where(np.isfinite(final), final, math.inf)
    best = int(np.argmin(finite))
    return SearchResult(
        best_objective=float(final[best]),
        best_T0=project(B[best]),
        restarts=restarts,
        steps=steps,
        learning_rate=lr,
        seed=seed,
        objective_trace_summary=[(float(a), float(b)) for a, b in zip(initial, final)],
        objective_label=getattr(objective, "label", ""),
        final_T0=project(B),
    )


class AdamClockSearch(BaseEstimator):
    """Estimator-style front end to :func:`adam_minimize`.

    ``objective`` is ``"pl"`` (maximize ``p(L)``) or ``"F"`` (minimize the
    accuracy-witness functional). After ``fit``: ``result_``, ``best_T0_``
    and ``best_value_`` (``p(L)`` itself for ``"pl"``).
    """

    def __init__(self, objective="pl", d=2, L=4, restarts=100, steps=10_000, lr=0.005, seed=0, threads=1):
        self.objective = objective
        self.d = d
        self.L = L
        self.restarts = restarts
        self.steps = steps
        self.lr = lr
        self.seed = seed
        self.threads = threads

    def _objective(self):
        if self.objective == "pl":
            return neg_G(self.L)
        if self.objective == "F":
            return F_objective()
        raise ValueError(f"unknown objective {self.objective!r}; use 'pl' or 'F'")

    def fit(self, X=None, y=None):
        self.result_ = adam_minimize(
            self._objective(), self.d, self.restarts, self.steps, self.lr, self.seed, self.threads
        )
        self.best_T0_ = self.result_.best_T0
        sign = -1.0 if self.objective == "pl" else 1.0
        self.best_value_ = sign * self.result_.best_objective
        return self

    def transform(self, X):
        """Project parameter stacks ``(n, 2, d, d)`` onto no-tick matrices."""
        return project(X)
