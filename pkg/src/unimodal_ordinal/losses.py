"""Per-sample training losses for ordinal classification.

Each loss takes 1-based true classes ``k_star`` and predictions for one
sample (shape ``(K,)``) or a batch (shape ``(n, K)``) and returns a node of
per-sample values (a scalar node for a single sample). Averaging over the
batch is left to the caller.
"""

import numpy as np

from . import autodiff as ad
from .transport import CostMatrix, project_unimodal_batch
from .validation import check_modes

WASS_DEAD_ZONE = 1e-12


def _prepare(yhat, k_star):
    yhat = ad.as_node(yhat)
    single = yhat.value.ndim == 1
    if single:
        yhat = ad.take(yhat, (None, slice(None)))
    n, K = yhat.shape
    ks = check_modes(k_star, n, K)
    return yhat, ks, single


def _finish(values, single):
    return ad.take(values, 0) if single else values


def _check_nonneg(**kwargs):
    for name, v in kwargs.items():
        if v < 0:
            raise ValueError(f"{name} must be >= 0, got {v}")


def ce_loss(k_star, yhat):
    """``-log yhat[k_star]`` with the probability clamped at 1e-12."""
    yhat, ks, single = _prepare(yhat, k_star)
    return _finish(-ad.clamp_log(ad.gather(yhat, ks - 1)), single)


def _pair_matrix(K, pairs):
    M = np.zeros((K, len(pairs)))
    for col, (lo, hi) in enumerate(pairs):
        M[lo, col] = 1.0
        M[hi, col] = -1.0
    return M


def _ordered_penalty(yhat, ks, delta, pairs):
    """Sum of ``relu(delta + violation)`` over ordered index pairs.

    For a pair ``(l, k)`` with ``l < k`` (0-based) the violation is
    ``yhat[l] - yhat[k]`` when both sit on the rising side (``k < k_star``)
    and ``yhat[k] - yhat[l]`` on the falling side (``l >= k_star - 1``).
    Pairs straddling the mode are not ordered and are skipped.
    """
    K = yhat.shape[1]
    lo = np.array([p[0] for p in pairs])
    hi = np.array([p[1] for p in pairs])
    mode = (ks - 1)[:, None]
    sign = np.where(hi[None, :] <= mode, 1.0, np.where(lo[None, :] >= mode, -1.0, 0.0))
    diff = yhat @ _pair_matrix(K, pairs)
    used = (sign != 0).astype(np.float64)
    # unordered pairs get a constant -1 argument, i.e. no penalty and no kink
    return ad.relu((diff * sign + delta) * used + (used - 1.0)).sum(axis=1)


def u_term(delta, k_star, yhat):
    """Consecutive-pair unimodality penalty.

    Zero at ``delta = 0`` exactly when ``yhat`` is unimodal with mode
    ``k_star``.
    """
    _check_nonneg(delta=delta)
    yhat, ks, single = _prepare(yhat, k_star)
    K = yhat.shape[1]
    return _finish(_ordered_penalty(yhat, ks, delta, [(i, i + 1) for i in range(K - 1)]),
                   single)


def uu_term(delta, k_star, yhat):
    """All-pairs version of :func:`u_term`."""
    _check_nonneg(delta=delta)
    yhat, ks, single = _prepare(yhat, k_star)
    K = yhat.shape[1]
    pairs = [(i, j) for i in range(K - 1) for j in range(i + 1, K)]
    return _finish(_ordered_penalty(yhat, ks, delta, pairs), single)


def co2_loss(delta, lam, k_star, yhat):
    _check_nonneg(delta=delta, lam=lam)
    return ce_loss(k_star, yhat) + lam * u_term(delta, k_star, yhat)


def co_loss(lam, k_star, yhat):
    return co2_loss(0.0, lam, k_star, yhat)


def uu_loss(delta, lam, k_star, yhat):
    _check_nonneg(delta=delta, lam=lam)
    return ce_loss(k_star, yhat) + lam * uu_term(delta, k_star, yhat)


def _is_line_cost(cost, K):
    return cost is None or np.array_equal(cost.entries, CostMatrix.power(K, 1.0).entries)


def project_targets(k_star, yhat, cost=None):
    """Projection targets for :func:`wu_penalty`: ``(projections, moved)``.

    ``moved`` flags rows that were not already unimodal with their mode.
    """
    yhat, ks, _ = _prepare(yhat, k_star)
    proj, dist = project_unimodal_batch(yhat.value, ks, cost)
    moved = (dist > 0) | np.any(proj != yhat.value, axis=1)
    return proj, moved


def wu_penalty(k_star, yhat, d2="kldiv", cost=None, targets=None):
    """Divergence between ``yhat`` and its transport projection onto the
    unimodal set with mode ``k_star``.

    The projection is a constant target: no gradient flows through it.
    ``d2`` is ``"kldiv"`` for ``KL(proj || yhat)`` or ``"wasserstein"``.
    ``targets`` may carry the output of :func:`project_targets` to hold the
    projection fixed (gradient checks do this).
    """
    yhat, ks, single = _prepare(yhat, k_star)
    n, K = yhat.shape
    if d2 not in ("kldiv", "wasserstein"):
        raise ValueError(f"d2 must be 'kldiv' or 'wasserstein', got {d2!r}")
    if d2 == "wasserstein" and not _is_line_cost(cost, K):
        raise ValueError("the Wasserstein penalty is implemented for the |i - j| cost only")
    if targets is None:
        targets = project_targets(ks, yhat, cost)
    proj, moved = targets
    proj = np.atleast_2d(proj)
    # rows already unimodal with their mode get exactly zero
    moved = np.atleast_1d(moved)
    target = ad.constant(proj)
    if d2 == "kldiv":
        with np.errstate(divide="ignore", invalid="ignore"):
            entropy_part = np.where(proj > 0, proj * np.log(proj), 0.0).sum(axis=1)
        value = entropy_part - (target * ad.clamp_log(yhat)).sum(axis=1)
    else:
        gap = ad.cumsum_forward(target - yhat)
        value = ad.abs_(ad.take(gap, (slice(None), slice(0, K - 1))),
                        dead_zone=WASS_DEAD_ZONE).sum(axis=1)
    return _finish(value * moved.astype(np.float64), single)


def wu_loss(k_star, yhat, lam=1.0, d2="kldiv", cost=None, targets=None):
    """Cross-entropy plus ``lam`` times :func:`wu_penalty`."""
    _check_nonneg(lam=lam)
    ce = ce_loss(k_star, yhat)
    if lam == 0:
        return ce
    return ce + lam * wu_penalty(k_star, yhat, d2, cost, targets)


def cdw_ce_loss(k_star, yhat, alpha=1.0):
    """``-sum_k log(1 - yhat_k) |k - k_star|^alpha`` (the true class drops out)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    yhat, ks, single = _prepare(yhat, k_star)
    K = yhat.shape[1]
    weights = np.abs(np.arange(1, K + 1)[None, :] - ks[:, None]).astype(np.float64) ** alpha
    return _finish(-(ad.clamp_log(1.0 - yhat) * weights).sum(axis=1), single)


def oe_targets(k_star, K):
    ks = np.atleast_1d(np.asarray(k_star))
    return (ks[:, None] > np.arange(1, K)[None, :]).astype(np.float64)


def oe_loss(k_star, logits):
    """Summed binary cross-entropy of the ``K - 1`` cumulative outputs.

    ``logits`` are the pre-sigmoid outputs; target ``k`` is ``1[k_star > k]``.
    """
    logits = ad.as_node(logits)
    single = logits.value.ndim == 1
    if single:
        logits = ad.take(logits, (None, slice(None)))
    n, width = logits.shape
    ks = check_modes(k_star, n, width + 1)
    t = oe_targets(ks, width + 1)
    return _finish((ad.softplus(logits) - logits * t).sum(axis=1), single)
