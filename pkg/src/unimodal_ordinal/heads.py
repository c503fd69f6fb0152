"""Output heads mapping network outputs to distributions over ordered classes.

All heads accept a single output vector or an ``(n, width)`` batch.
"""

import numpy as np
from scipy.special import gammaln

from . import autodiff as ad

POISSON_RATE_FLOOR = 1e-6
NONNEGATIVE = {"relu": ad.relu, "softplus": ad.softplus}


def _check_classes(K):
    if int(K) != K or K < 2:
        raise ValueError(f"need an integer number of classes >= 2, got {K!r}")
    return int(K)


def softmax_head(z):
    """Unconstrained softmax distribution (used by CE and the soft penalties)."""
    return ad.softmax(z)


def unimodal_net_head(z, nonneg="relu", return_parts=False):
    """Distribution that is unimodal for every input ``z``.

    ``zz = nonneg(z)`` is accumulated from the left (``zm``) and from the
    right (``zd``); their elementwise minimum rises then falls, and softmax
    keeps that ordering.
    """
    if nonneg not in NONNEGATIVE:
        raise ValueError(f"nonneg must be one of {sorted(NONNEGATIVE)}, got {nonneg!r}")
    z = ad.as_node(z)
    _check_classes(z.shape[-1])
    zz = NONNEGATIVE[nonneg](z)
    zm = ad.cumsum_forward(zz)
    zd = ad.cumsum_reverse(zz)
    zo = ad.elementwise_min(zm, zd)
    yhat = ad.softmax(zo)
    if return_parts:
        return yhat, {"zz": zz, "zm": zm, "zd": zd, "zo": zo}
    return yhat


def binomial_head(logit, K):
    """Binomial(K-1, sigmoid(logit)) pmf over classes ``1..K``.

    ``logit`` has shape ``(n, 1)`` (or ``(1,)`` for one sample).
    """
    K = _check_classes(K)
    logit = ad.as_node(logit)
    if logit.shape[-1] != 1:
        raise ValueError(f"binomial head takes one output per sample, got {logit.shape}")
    j = np.arange(K, dtype=np.float64)
    log_comb = gammaln(K) - gammaln(j + 1) - gammaln(K - j)
    log_p = -ad.softplus(-logit)          # log sigmoid(x)
    log_q = -ad.softplus(logit)           # log (1 - sigmoid(x))
    return ad.exp(log_comb + log_p * j + log_q * (K - 1 - j))


def poisson_rate(raw):
    return ad.softplus(raw) + POISSON_RATE_FLOOR


def poisson_head(raw, K, tau=1.0):
    """Softmax of ``tau`` times the Poisson log-pmf at ``k = 1..K``.

    The log-pmf is concave in ``k``, so the output is unimodal for any
    ``tau > 0``. ``tau`` may be a float or a node (learnable temperature).
    """
    K = _check_classes(K)
    raw = ad.as_node(raw)
    if raw.shape[-1] != 1:
        raise ValueError(f"Poisson head takes one output per sample, got {raw.shape}")
    if not isinstance(tau, ad.Node) and not np.all(np.asarray(tau) > 0):
        raise ValueError("tau must be positive")
    k = np.arange(1, K + 1, dtype=np.float64)
    rate = poisson_rate(raw)
    scores = ad.log(rate) * k - rate - gammaln(k + 1)
    return ad.softmax(scores * tau)


def ordinal_encoding_head(z):
    """Cumulative probabilities ``P(y > k)`` and the implied distribution.

    ``z`` has ``K - 1`` entries per sample. Returns ``(cumulative, yhat)``
    where ``cumulative`` is a node and ``yhat`` a plain array built from
    adjacent differences, clipped at zero and renormalised.
    """
    cumulative = ad.sigmoid(z)
    return cumulative, cumulative_to_distribution(cumulative.value)


def cumulative_to_distribution(cumulative):
    s = np.atleast_2d(np.asarray(cumulative, dtype=np.float64))
    n = s.shape[0]
    upper = np.concatenate([np.ones((n, 1)), s], axis=1)
    lower = np.concatenate([s, np.zeros((n, 1))], axis=1)
    p = np.clip(upper - lower, 0.0, None)
    total = p.sum(axis=1, keepdims=True)
    # all-zero rows only arise from degenerate input; fall back to uniform
    p = np.where(total > 0, p / np.where(total > 0, total, 1.0), 1.0 / p.shape[1])
    return p[0] if np.ndim(cumulative) == 1 else p


def predict_label(output, kind="distribution"):
    """1-based class prediction.

    ``kind="distribution"``: argmax, lowest index on ties.
    ``kind="cumulative"``: one plus the number of thresholds above 0.5.
    """
    arr = np.asarray(output.value if isinstance(output, ad.Node) else output, dtype=np.float64)
    if kind == "distribution":
        return np.argmax(arr, axis=-1) + 1
    if kind == "cumulative":
        return (arr > 0.5).sum(axis=-1) + 1
    raise ValueError(f"unknown output kind {kind!r}")
