"""scikit-learn compatible ordinal classifier: a one-hidden-layer MLP trained
with any registered head/loss pair."""

import time

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import autodiff as ad
from .methods import LossSpec, extra_parameters, forward_head, output_width, sample_losses, \
    predict_from_output

FULL_BATCH_LIMIT = 5000
DEFAULT_BATCH = 256


class TrainingDivergedError(FloatingPointError):
    """The training loss became NaN or infinite."""


class TrainingTimeoutError(TimeoutError):
    """Training exceeded its wall-clock budget."""


def init_mlp(n_inputs, hidden, n_outputs, rng):
    params = ad.ParameterSet()
    params.add("W1", ad.glorot_uniform(n_inputs, hidden, rng))
    params.add("b1", np.zeros(hidden))
    params.add("W2", ad.glorot_uniform(hidden, n_outputs, rng))
    params.add("b2", np.zeros(n_outputs))
    return params


def mlp_forward(params, X):
    h = ad.relu(ad.dense(X, params["W1"], params["b1"]))
    return ad.dense(h, params["W2"], params["b2"])


def resolve_batch_size(batch_size, n):
    if batch_size in (None, "auto"):
        return n if n <= FULL_BATCH_LIMIT else DEFAULT_BATCH
    if batch_size == "full":
        return n
    batch_size = int(batch_size)
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    return min(batch_size, n)


class UnimodalOrdinalClassifier(ClassifierMixin, BaseEstimator):
    """MLP ordinal classifier.

    Parameters
    ----------
    loss : str
        One of ``ce, oe, cdw-ce, bu, pu, un, wu-kldiv, wu-wass, co2, co, uu``.
    lam, delta, r, alpha, tau, nonneg
        Loss settings, see :class:`~unimodal_ordinal.methods.LossSpec`.
    hidden : int
        Width of the ReLU hidden layer.
    epochs : int
        Passes over the training data (no early stopping).
    lr : float
        Adam learning rate.
    batch_size : int, "auto" or "full"
        ``"auto"`` uses the whole training set up to 5,000 rows and 256 above.
    random_state : int
        Seeds initialisation and batch shuffling.
    max_seconds : float or None
        Wall-clock budget; exceeding it raises ``TrainingTimeoutError``.
    n_classes : int or None
        Number of ordered classes ``1..K``. Inferred from ``y`` when None.

    Labels passed to :meth:`fit` must be integers; the sorted distinct
    values (or ``1..n_classes``) define the class order.
    """

    def __init__(self, loss="ce", lam=1.0, delta=0.05, r=1.0, alpha=1.0, tau=None,
                 nonneg="relu", hidden=128, epochs=1000, lr=1e-4, batch_size="auto",
                 random_state=0, max_seconds=600.0, n_classes=None):
        self.loss = loss
        self.lam = lam
        self.delta = delta
        self.r = r
        self.alpha = alpha
        self.tau = tau
        self.nonneg = nonneg
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.random_state = random_state
        self.max_seconds = max_seconds
        self.n_classes = n_classes

    def _spec(self):
        return LossSpec(self.loss, lam=float(self.lam), delta=float(self.delta), r=float(self.r),
                        alpha=float(self.alpha), tau=self.tau, nonneg=self.nonneg)

    def _encode(self, y):
        if not np.issubdtype(np.asarray(y).dtype, np.number) or np.any(y != np.round(y)):
            raise ValueError("ordinal labels must be integers")
        y = np.asarray(y).astype(np.int64)
        if self.n_classes is None:
            self.classes_ = np.unique(y)
        else:
            self.classes_ = np.arange(1, int(self.n_classes) + 1)
            if y.min() < 1 or y.max() > self.n_classes:
                raise ValueError(f"labels must lie in 1..{self.n_classes}")
        if self.classes_.size < 2:
            raise ValueError("need at least two classes")
        return np.searchsorted(self.classes_, y) + 1

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        spec = self._spec()
        ranks = self._encode(y)
        K = self.classes_.size
        if int(self.hidden) < 1 or int(self.epochs) < 0:
            raise ValueError("hidden must be >= 1 and epochs >= 0")
        rng = np.random.default_rng(self.random_state)
        params = init_mlp(X.shape[1], int(self.hidden), output_width(spec.name, K), rng)
        for name, value in extra_parameters(spec).items():
            params.add(name, value)
        state = ad.AdamState(params, lr=float(self.lr))
        n = X.shape[0]
        batch = resolve_batch_size(self.batch_size, n)
        start = time.perf_counter()
        history = []
        for epoch in range(int(self.epochs)):
            order = rng.permutation(n) if batch < n else np.arange(n)
            total = 0.0
            for lo in range(0, n, batch):
                idx = order[lo:lo + batch]
                out = forward_head(spec, mlp_forward(params, X[idx]), K, params)
                loss = sample_losses(spec, out, ranks[idx]).mean()
                value = float(loss)
                if not np.isfinite(value):
                    raise TrainingDivergedError(
                        f"loss became {value} at epoch {epoch + 1} ({spec.name}, lr={self.lr})")
                params.zero_grad()
                ad.backward(loss)
                ad.adam_step(params, params.grads(), state)
                total += value * idx.size
            history.append(total / n)
            if self.max_seconds is not None and time.perf_counter() - start > self.max_seconds:
                raise TrainingTimeoutError(
                    f"training exceeded {self.max_seconds:.0f}s after {epoch + 1} epochs")
        self.params_ = params
        self.loss_history_ = np.array(history)
        self.n_features_in_ = X.shape[1]
        self.spec_ = spec
        return self

    def _output(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return forward_head(self.spec_, mlp_forward(self.params_, X), self.classes_.size,
                            self.params_)

    def predict_proba(self, X):
        """Class distribution per row (for OE: clipped cumulative differences)."""
        return np.array(self._output(X).distribution)

    def predict(self, X):
        return self.classes_[predict_from_output(self._output(X)) - 1]

    def score_mae(self, X, y):
        """Mean absolute error in class-index units."""
        pred = np.searchsorted(self.classes_, self.predict(X))
        true = np.searchsorted(self.classes_, np.asarray(y))
        return float(np.abs(pred - true).mean())
