"""Unimodal distributions on the probability simplex.

A distribution ``p`` over ordered classes ``1..K`` is unimodal with mode ``k``
when ``p[1] <= ... <= p[k] >= p[k+1] >= ... >= p[K]``. Comparisons are
non-strict and relaxed by an additive tolerance, so the uniform vector is
unimodal for every mode.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .validation import check_distribution, check_mode

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class UnimodalFractions:
    """Fractions of the simplex covered by unimodal / non-unimodal vectors."""

    us: float
    ns: float


def is_unimodal_with_mode(p, k, tol=DEFAULT_TOL):
    """Return True when ``p`` rises (weakly) up to ``k`` and falls after it."""
    p = check_distribution(p)
    k = check_mode(k, p.size)
    if tol < 0:
        raise ValueError("tol must be non-negative")
    for i in range(k - 1):
        if p[i] > p[i + 1] + tol:
            return False
    for i in range(k - 1, p.size - 1):
        if p[i] + tol < p[i + 1]:
            return False
    return True


def modes(p, tol=DEFAULT_TOL):
    """Set of 1-based indices ``k`` for which ``p`` is unimodal with mode ``k``."""
    p = check_distribution(p)
    return {k for k in range(1, p.size + 1) if is_unimodal_with_mode(p, k, tol)}


def is_unimodal(p, tol=DEFAULT_TOL):
    """True when ``p`` is unimodal for at least one mode."""
    return bool(modes(p, tol))


def mode_interval(P, tol=DEFAULT_TOL):
    """Vectorised mode range for a batch of distributions.

    Returns ``(lo, hi)`` such that row ``n`` is unimodal with mode ``k``
    exactly when ``lo[n] <= k <= hi[n]``; the row is not unimodal at all
    when ``lo[n] > hi[n]``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    n, K = P.shape
    d = np.diff(P, axis=1)
    j = np.arange(1, K)
    down = d < -tol
    up = d > tol
    first_down = np.where(down.any(axis=1), np.where(down, j, K).min(axis=1), K)
    last_up = np.where(up.any(axis=1), np.where(up, j, 0).max(axis=1), 0)
    return last_up + 1, first_down


def is_unimodal_batch(P, tol=DEFAULT_TOL):
    """Boolean vector: which rows of ``P`` are unimodal for some mode."""
    lo, hi = mode_interval(P, tol)
    return lo <= hi


def is_unimodal_with_mode_batch(P, ks, tol=DEFAULT_TOL):
    """Boolean vector: row ``n`` of ``P`` is unimodal with mode ``ks[n]``."""
    lo, hi = mode_interval(P, tol)
    ks = np.asarray(ks)
    return (lo <= ks) & (ks <= hi)


def unimodal_fraction_exact(K):
    """Exact fraction of the (K-1)-simplex that is (non-)unimodal.

    Uses ``ns(K) = (K-2)/K + 2/K * ns(K-1)`` seeded with ``ns(3) = 1/3``.
    """
    if int(K) != K or K < 3:
        raise ValueError(f"the recursion is defined for integer K >= 3, got {K!r}")
    ns = Fraction(1, 3)
    for k in range(4, int(K) + 1):
        ns = Fraction(k - 2, k) + Fraction(2, k) * ns
    return UnimodalFractions(us=float(1 - ns), ns=float(ns))


def unimodal_fraction(K):
    """Like :func:`unimodal_fraction_exact` but also answers ``K = 2``."""
    if K == 2:
        # every distribution on two classes is unimodal
        return UnimodalFractions(us=1.0, ns=0.0)
    return unimodal_fraction_exact(K)


def sample_uniform_simplex(K, n, seed=None):
    """Draw ``n`` points uniformly from the (K-1)-simplex.

    Normalised i.i.d. exponentials give a flat Dirichlet sample.
    """
    if K < 2 or n < 1:
        raise ValueError("need K >= 2 and n >= 1")
    rng = np.random.default_rng(seed)
    e = rng.standard_exponential((int(n), int(K)))
    return e / e.sum(axis=1, keepdims=True)


def estimate_unimodal_fraction_mc(K, n, seed=None, chunk=200_000):
    """Monte-Carlo estimate of the unimodal fraction and its standard error."""
    if K < 3 or n < 1000:
        raise ValueError("need K >= 3 and n >= 1000")
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = int(n)
    while remaining:
        m = min(chunk, remaining)
        e = rng.standard_exponential((m, int(K)))
        # ordering is scale invariant, so normalisation can be skipped
        hits += int(is_unimodal_batch(e, tol=0.0).sum())
        remaining -= m
    est = hits / n
    return est, float(np.sqrt(est * (1.0 - est) / n))


def connectedness_path(p, k, steps_per_stage=10):
    """Path of mode-``k`` unimodal distributions from ``p`` to the one-hot at ``k``.

    Mass is drained one index at a time, first ``1..k-1`` then ``K..k+1``.
    Draining index ``i`` spreads ``delta * p_i`` evenly over the indices
    between ``i`` and the mode (inclusive of the mode), which keeps the
    ordering intact for every ``delta`` in ``[0, 1]``.
    """
    p = check_distribution(p)
    K = p.size
    k = check_mode(k, K)
    if steps_per_stage < 1:
        raise ValueError("steps_per_stage must be >= 1")
    if not is_unimodal_with_mode(p, k):
        raise ValueError(f"p is not unimodal with mode {k}")
    cur = p.copy()
    path = [cur.copy()]
    deltas = np.linspace(0.0, 1.0, steps_per_stage + 1)[1:]
    order = list(range(1, k)) + list(range(K, k, -1))
    for i in order:
        idx = i - 1
        targets = np.arange(idx + 1, k) if i < k else np.arange(k - 1, idx)
        base = cur.copy()
        mass = base[idx]
        for delta in deltas:
            q = base.copy()
            q[idx] = mass - delta * mass
            q[targets] += delta * mass / targets.size
            if delta == 1.0:
                q[idx] = 0.0
            path.append(q)
        cur = path[-1]
    return path
