"""Certified upper bounds on ``max p(L)`` over all classical ``d``-state clocks.

The feasible set is the product over rows of ``{x >= 0, sum(x) <= 1}``, a
subset of ``[0, 1]^D`` with ``D = d^2``. On it every partial derivative of
``p(L)`` lies in ``[-1, 1]``, so for two feasible points

    |p(x) - p(y)| <= ||x - y||_1.

The search tiles ``[0, 1]^D`` by cubic cells of edge ``delta`` and evaluates
one feasible representative per cell. A cell is discarded once
``p(rep) + delta d^2`` falls below the incumbent; survivors are split into
``refine_factor^D`` sub-cells and the process repeats. The certified bound
is the incumbent or the largest ``p(rep) + err(rep)`` over the final
survivors, whichever is larger.

Representatives are cell centers. When a center violates a row-sum
constraint its row is shifted by ``t = (s - 1)/d`` per entry back onto the
face ``sum = 1``; the shifted point stays inside the cell and its error
radius grows from ``D delta / 2`` to ``D delta / 2 + d * sum(t)``, never
more than ``delta d^2``.
"""
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import __version__
from .models import multicyclic_matrix, multicyclic_start, optimal_q_multicyclic
from .witness import classical_bound_estimate

logger = logging.getLogger(__name__)

CHUNK_POINTS = 1 << 18
FLOAT_SLACK = 1e-14


@dataclass(frozen=True)
class LatticeSpec:
    d: int
    delta: float

    @property
    def D(self):
        return self.d * self.d


@dataclass
class StageRecord:
    delta: float
    points_evaluated: int
    points_surviving: int
    upper_bound: float
    incumbent: float


@dataclass
class BoundCertificate:
    d: int
    L: int
    incumbent: float
    incumbent_T0: list
    upper_bound: float
    final_delta: float
    gradient_bound: float
    error_term: float
    max_point_error: float
    target_error: float
    refinement_schedule: list = field(default_factory=list)
    elapsed_seconds: float = 0.0
    partial: bool = False
    delta0: float = 0.1
    refine_factor: int = 2
    max_points_per_stage: int = 0
    threads: int = 1
    toolversion: str = __version__
    rng_seed: int | None = None

    @property
    def gap(self):
        return self.upper_bound - self.incumbent

    def to_dict(self):
        out = asdict(self)
        out["refinement_schedule"] = [asdict(s) if not isinstance(s, dict) else s for s in self.refinement_schedule]
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["refinement_schedule"] = [StageRecord(**s) for s in data.get("refinement_schedule", [])]
        return cls(**data)


def pL_batch(T, L):
    """``p(L)`` for a stack of no-tick matrices ``T`` (shape ``(n, d, d)``), start state 1."""
    d = T.shape[-1]
    tick = 1.0 - T.sum(axis=-1)
    if d == 2:
        a, b, c, e = T[:, 0, 0], T[:, 0, 1], T[:, 1, 0], T[:, 1, 1]
        v0 = np.ones_like(a)
        v1 = np.zeros_like(a)
        for _ in range(L - 1):
            v0, v1 = v0 * a + v1 * c, v0 * b + v1 * e
        return v0 * tick[:, 0] + v1 * tick[:, 1]
    v = np.zeros(T.shape[:-1])
    v[:, 0] = 1.0
    for _ in range(L - 1):
        v = np.einsum("ni,nij->nj", v, T)
    return np.einsum("ni,ni->n", v, tick)


def grad_pL(T0, L):
    """Gradient of ``p(L) = e_1 T^(L-1) (1 - T) eta`` with respect to the entries of ``T``.

    ``dp/dT_ij = sum_{r=0}^{L-2} (e_1 T^r)_i (T^(L-2-r) (1-T) eta)_j - (e_1 T^(L-1))_i``,
    from one forward pass over row vectors and one backward pass over
    column vectors. Accepts a single matrix or a stack ``(..., d, d)``.
    """
    T = np.asarray(T0, dtype=float)
    if L < 1:
        raise ValueError("L must be >= 1")
    d = T.shape[-1]
    fwd = [np.broadcast_to(np.eye(d)[0], T.shape[:-1]).copy()]
    for _ in range(L - 1):
        fwd.append(np.einsum("...i,...ij->...j", fwd[-1], T))
    bwd = [1.0 - T.sum(axis=-1)]
    for _ in range(L - 2):
        bwd.append(np.einsum("...ij,...j->...i", T, bwd[-1]))
    grad = -fwd[L - 1][..., :, None] * np.ones(d)
    for r in range(L - 1):
        grad = grad + fwd[r][..., :, None] * bwd[L - 2 - r][..., None, :]
    return grad


def _row_groups(d):
    return [slice(i * d, (i + 1) * d) for i in range(d)]


def _feasible_mask(idx, N, d):
    ok = np.ones(len(idx), dtype=bool)
    for rows in _row_groups(d):
        ok &= idx[:, rows].sum(axis=1) <= N
    return ok


def _representatives(idx, N, d):
    """Feasible representative points and their error radii."""
    delta = 1.0 / N
    D = d * d
    pts = (idx + 0.5) * delta
    extra = np.zeros(len(idx))
    for rows in _row_groups(d):
        s = pts[:, rows].sum(axis=1)
        t = np.maximum(0.0, (s - 1.0) / d)
        pts[:, rows] -= t[:, None]
        extra += d * t
    np.maximum(pts, 0.0, out=pts)
    err = D * delta / 2.0 + extra
    return pts, err


def _evaluate(idx, N, d, L):
    pts, err = _representatives(idx, N, d)
    p = pL_batch(pts.reshape(-1, d, d), L)
    return p, err


def _initial_cells(N, d):
    # all row patterns with nonnegative integer lower corners, sum <= N
    grids = np.stack(np.meshgrid(*[np.arange(N)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    rows = grids[grids.sum(axis=1) <= N]
    idx = rows
    for _ in range(d - 1):
        idx = np.concatenate(
            [np.repeat(idx, len(rows), axis=0), np.tile(rows, (len(idx), 1))], axis=1
        )
    return idx.astype(np.int64)


def _children(parents, r, N_child, d):
    D = d * d
    offsets = np.stack(np.meshgrid(*[np.arange(r)] * D, indexing="ij"), axis=-1).reshape(-1, D)
    kids = (parents[:, None, :] * r + offsets[None, :, :]).reshape(-1, D)
    return kids[_feasible_mask(kids, N_child, d)]


def _chunks(cells, size):
    for start in range(0, len(cells), size):
        yield cells[start:start + size]


def _child_chunks(parents, r, N_child, d):
    per_parent = r ** (d * d)
    step = max(1, CHUNK_POINTS // per_parent)
    for start in range(0, len(parents), step):
        yield _children(parents[start:start + step], r, N_child, d)


class _Stage:
    """Evaluate one refinement level chunk by chunk, keeping survivors."""

    def __init__(self, N, d, L, incumbent):
        self.N, self.d, self.L = N, d, L
        self.prune_err = d * d / N
        self.incumbent = incumbent

    def __call__(self, cells):
        p, err = _evaluate(cells, self.N, self.d, self.L)
        keep = p + self.prune_err >= self.incumbent
        best = int(np.argmax(p)) if len(p) else -1
        best_p = float(p[best]) if best >= 0 else -math.inf
        best_cell = cells[best] if best >= 0 else None
        return cells[keep], p[keep], err[keep], len(cells), best_p, best_cell


def _T0_of(cell, N, d):
    pts, _ = _representatives(cell[None, :], N, d)
    return pts.reshape(d, d)


def certified_upper_bound(d, L, target_error=1e-2, threads=1, refine_factor=2, delta0=0.1,
                          max_points_per_stage=200_000_000, progress=False):
    """Certified ``Omega`` with ``max_T p(L) <= upper_bound`` over all ``d``-state clocks.

    Stops once ``delta d^2 / 2 <= target_error`` and the certified gap
    ``upper_bound - incumbent`` is at most ``target_error``. If a stage would
    exceed ``max_points_per_stage`` evaluations, the certificate of the last
    completed stage is returned with ``partial=True``.
    """
    if d not in (2, 3):
        raise ValueError("lattice certification is available for d in {2, 3} only")
    if L < d + 1:
        raise ValueError(f"L must be at least d + 1 = {d + 1}")
    if target_error <= 0:
        raise ValueError("target_error must be positive")
    if refine_factor < 2:
        raise ValueError("refine_factor must be at least 2")
    t_start = time.perf_counter()
    N = max(1, round(1.0 / delta0))
    r = int(refine_factor)
    D = d * d

    incumbent, k_est = classical_bound_estimate(d, L)
    # relabel states so the shifted multicyclic start becomes state 1
    perm = np.roll(np.arange(d), -multicyclic_start(k_est, L))
    inc_T0 = multicyclic_matrix(d, k_est, optimal_q_multicyclic(d, k_est, L))[np.ix_(perm, perm)]
    schedule = []
    running_ub = math.inf
    partial = False

    cells_source = list(_chunks(_initial_cells(N, d), CHUNK_POINTS))
    survivors = None
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        while True:
            stage = _Stage(N, d, L, incumbent)
            results = list(pool.map(stage, cells_source))
            evaluated = sum(res[3] for res in results)
            for res in results:
                if res[4] > incumbent:
                    incumbent = res[4]
                    inc_T0 = _T0_of(res[5], N, d)
            # second filter with the stage-final incumbent: order independent
            kept_idx, kept_p, kept_err = [], [], []
            for cells, p, err, *_ in results:
                keep = p + stage.prune_err >= incumbent
                kept_idx.append(cells[keep])
                kept_p.append(p[keep])
                kept_err.append(err[keep])
            survivors = np.concatenate(kept_idx) if kept_idx else np.zeros((0, D), np.int64)
            p_s = np.concatenate(kept_p) if kept_p else np.zeros(0)
            err_s = np.concatenate(kept_err) if kept_err else np.zeros(0)

            stage_ub = max(incumbent, float((p_s + err_s).max()) if len(p_s) else -math.inf) + FLOAT_SLACK
            running_ub = min(running_ub, stage_ub)
            delta = 1.0 / N
            schedule.append(StageRecord(delta, evaluated, len(survivors), running_ub, incumbent))
            max_err = float(err_s.max()) if len(err_s) else 0.0
            if progress:
                print(
                    f"[bound d={d} L={L}] delta={delta:.3e} evaluated={evaluated} "
                    f"surviving={len(survivors)} ub={running_ub:.8f} inc={incumbent:.8f}",
                    file=sys.stderr,
                )
            logger.info("delta=%g evaluated=%d surviving=%d ub=%.10f", delta, evaluated, len(survivors), running_ub)

            if delta * D / 2.0 <= target_error and running_ub - incumbent <= target_error:
                break
            n_children = len(survivors) * r**D
            if n_children > max_points_per_stage:
                partial = True
                break
            N *= r
            cells_source = _child_chunks(survivors, r, N, d)

    return BoundCertificate(
        d=d,
        L=L,
        incumbent=incumbent,
        incumbent_T0=np.asarray(inc_T0).tolist(),
        upper_bound=running_ub,
        final_delta=1.0 / N,
        gradient_bound=float(d),
        error_term=D / N / 2.0,
        max_point_error=max_err,
        target_error=target_error,
        refinement_schedule=schedule,
        elapsed_seconds=time.perf_counter() - t_start,
        partial=partial,
        delta0=1.0 / round(1.0 / delta0),
        refine_factor=r,
        max_points_per_stage=max_points_per_stage,
        threads=threads,
    )


class LatticeCertifier(BaseEstimator):
    """Estimator-style wrapper: ``fit()`` runs the certification.

    Fitted attributes: ``certificate_``, ``upper_bound_``, ``incumbent_``.
    """

    def __init__(self, d=2, L=3, target_error=1e-2, threads=1, refine_factor=2, delta0=0.1,
                 max_points_per_stage=200_000_000):
        self.d = d
        self.L = L
        self.target_error = target_error
        self.threads = threads
        self.refine_factor = refine_factor
        self.delta0 = delta0
        self.max_points_per_stage = max_points_per_stage

    def fit(self, X=None, y=None):
        self.certificate_ = certified_upper_bound(**self.get_params())
        self.upper_bound_ = self.certificate_.upper_bound
        self.incumbent_ = self.certificate_.incumbent
        return self

    def score(self, X=None, y=None):
        """Negative certified gap (larger is better)."""
        check_is_fitted(self, "certificate_")
        return -self.certificate_.gap
