"""Discrete optimal transport on the ordered class line.

Plans are ``K x K`` matrices ``t[i, j]``. For the projection onto the
mode-``k`` unimodal set, rows index the projected distribution and columns
index the input ``q``: column sums are pinned to ``q`` and the row sums
(the projection) must rise up to ``k`` and fall after it.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import lp
from .simplex import DEFAULT_TOL, is_unimodal_with_mode_batch
from .validation import check_distribution, check_mode, check_modes

RENORM_TOL = 1e-7


class TransportError(RuntimeError):
    """The underlying linear program did not reach an optimal solution."""


@dataclass(frozen=True)
class CostMatrix:
    """Ground cost between class positions; defaults to ``|i - j| ** r``."""

    entries: np.ndarray
    exponent: float = None

    def __post_init__(self):
        c = np.asarray(self.entries, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"cost matrix must be square, got shape {c.shape}")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("transport costs must be finite and non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "entries", c)

    @classmethod
    def power(cls, K, r=1.0):
        if r <= 0:
            raise ValueError("cost exponent must be positive")
        idx = np.arange(K, dtype=np.float64)
        return cls(np.abs(idx[:, None] - idx[None, :]) ** r, exponent=float(r))

    @property
    def K(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class TransportPlan:
    t: np.ndarray
    objective: float


def _cost_for(cost, K):
    if cost is None:
        return CostMatrix.power(K)
    if cost.K != K:
        raise ValueError(f"cost matrix is {cost.K}x{cost.K} but distributions have {K} classes")
    return cost


def _check_status(sol, what):
    if sol.status is not lp.LpStatus.OPTIMAL:
        raise TransportError(f"{what}: LP finished with status {sol.status.value}")


@lru_cache(maxsize=64)
def _marginal_rows(K):
    eye = np.eye(K)
    ones = np.ones(K)
    row_sums = np.kron(eye, ones)   # sum_j t[i, j] for each i
    col_sums = np.kron(ones, eye)   # sum_i t[i, j] for each j
    return row_sums, col_sums


@lru_cache(maxsize=256)
def _unimodal_rows(K, k):
    """``A_ub`` rows forcing the row sums of ``t`` to be unimodal with mode ``k``."""
    row_sums, _ = _marginal_rows(K)
    A = np.zeros((K - 1, K * K))
    for i in range(K - 1):
        if i + 1 < k:
            A[i] = row_sums[i] - row_sums[i + 1]     # r_i <= r_{i+1}
        else:
            A[i] = row_sums[i + 1] - row_sums[i]     # r_{i+1} <= r_i
    return A


def wasserstein_distance(p, q, cost=None):
    """Optimal transport cost between ``p`` (rows) and ``q`` (columns)."""
    p = check_distribution(p, name="p")
    q = check_distribution(q, name="q")
    if p.size != q.size:
        raise ValueError("p and q must have the same number of classes")
    K = p.size
    cost = _cost_for(cost, K)
    row_sums, col_sums = _marginal_rows(K)
    problem = lp.LinearProgram(
        cost.entries.ravel(),
        A_eq=np.vstack([row_sums, col_sums]),
        b_eq=np.concatenate([p, q]),
    )
    sol = lp.solve(problem)
    _check_status(sol, "Wasserstein distance")
    t = np.maximum(sol.x.reshape(K, K), 0.0)
    value = max(float(sol.objective_value), 0.0)
    return value, TransportPlan(t, value)


def wasserstein_distance_cdf(p, q):
    """Closed-form 1-Wasserstein distance on the unit-spaced line."""
    p = check_distribution(p, name="p")
    q = check_distribution(q, name="q")
    if p.size != q.size:
        raise ValueError("p and q must have the same number of classes")
    return float(np.abs(np.cumsum(p - q)[:-1]).sum())


@lru_cache(maxsize=512)
def _projection_program(K, k, cost_bytes):
    cost = np.frombuffer(cost_bytes, dtype=np.float64)
    return lp.BatchProgram(cost, _marginal_rows(K)[1], _unimodal_rows(K, k))


def _solve_projection(Q, k, cost):
    """LP projections of the rows of ``Q`` (all sharing mode ``k``).

    Returns ``(projections, distances, plans)`` with plans of shape (n, K, K).
    """
    n, K = Q.shape
    program = _projection_program(K, k, cost.entries.tobytes())
    X, obj, status, _, _ = program.solve(Q)
    if np.any(status != 0):
        bad = lp._STATUS[int(status[status != 0][0])].value
        raise TransportError(f"unimodal projection (mode {k}): LP finished with status {bad}")
    plans = np.maximum(X.reshape(n, K, K), 0.0)
    proj = plans.sum(axis=2)
    total = proj.sum(axis=1)
    drift = np.abs(total - 1.0).max()
    if drift > RENORM_TOL:
        raise TransportError(f"projection mass drifted by {drift:.3g}")
    return proj / total[:, None], np.maximum(obj, 0.0), plans


def project_unimodal(q, k, cost=None):
    """Nearest mode-``k`` unimodal distribution to ``q`` under transport cost.

    Returns ``(projection, distance, plan)``. A ``q`` that already satisfies
    the mode-``k`` ordering is its own projection at distance zero.
    """
    q = check_distribution(q, name="q")
    K = q.size
    k = check_mode(k, K)
    cost = _cost_for(cost, K)
    if is_unimodal_with_mode_batch(q[None, :], [k], DEFAULT_TOL)[0]:
        return q.copy(), 0.0, TransportPlan(np.diag(q), 0.0)
    proj, dist, plans = _solve_projection(q[None, :], k, cost)
    return proj[0], float(dist[0]), TransportPlan(plans[0], float(dist[0]))


def project_unimodal_batch(Q, ks, cost=None):
    """Project every row of ``Q`` onto the unimodal set of its own mode.

    Rows already unimodal with their mode are returned unchanged; the rest
    are grouped by mode and solved together. Returns ``(projections,
    distances)``.
    """
    Q = np.asarray(Q, dtype=np.float64)
    n, K = Q.shape
    ks = check_modes(ks, n, K)
    cost = _cost_for(cost, K)
    out = Q.copy()
    dist = np.zeros(n)
    bad = ~is_unimodal_with_mode_batch(Q, ks, DEFAULT_TOL)
    for k in np.unique(ks[bad]):
        rows = np.nonzero(bad & (ks == k))[0]
        proj, d, _ = _solve_projection(Q[rows], int(k), cost)
        out[rows] = proj
        dist[rows] = d
    return out, dist


def distance_to_unimodal_set(q, k, cost=None):
    """Transport distance from ``q`` to the mode-``k`` unimodal set."""
    return project_unimodal(q, k, cost)[1]
