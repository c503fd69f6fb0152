"""A small reverse-mode automatic differentiation engine over numpy arrays.

Every operation returns a :class:`Node` holding its value and a closure that
maps the output adjoint to parent adjoints. :func:`backward` walks the graph
once in reverse topological order and accumulates into the ``grad`` of leaf
nodes that require gradients. Only scalar losses can be differentiated.

Row-wise operations (softmax, cumulative sums, ...) act on the last axis, so
a batch of ``n`` logit vectors is simply an ``(n, K)`` node.
"""

from collections import OrderedDict
from contextlib import contextmanager

import numpy as np
from scipy.special import expit

LOG_FLOOR = 1e-12


class Node:
    """A value in the computation graph."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "name")
    # make numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, value, parents=(), backward=None, requires_grad=None, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self._parents = tuple(parents)
        self._backward = backward
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in self._parents)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __float__(self):
        if self.value.size != 1:
            raise TypeError(f"only single-element nodes convert to float, got shape {self.shape}")
        return float(self.value.reshape(()))

    def numpy(self):
        return self.value

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)


def as_node(x):
    return x if isinstance(x, Node) else Node(x, requires_grad=False)


def constant(x):
    """Wrap ``x`` (or the value of a node) as a graph leaf without gradient."""
    if isinstance(x, Node):
        x = x.value
    return Node(np.array(x, dtype=np.float64), requires_grad=False)


detach = constant


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _make(value, parents, rule):
    return Node(value, parents, rule)


class KinkMonitor:
    """Records how close non-smooth ops came to their kinks."""

    def __init__(self):
        self.distance = np.inf

    def note(self, gap):
        gap = np.asarray(gap)
        if gap.size:
            self.distance = min(self.distance, float(np.abs(gap).min()))


_MONITORS = []


@contextmanager
def kink_monitor():
    """Track the smallest distance to a kink over ops built inside the block.

    Covers relu, abs, elementwise_min and the clamp of clamp_log.
    """
    mon = KinkMonitor()
    _MONITORS.append(mon)
    try:
        yield mon
    finally:
        _MONITORS.remove(mon)


def _note_kink(gap):
    for mon in _MONITORS:
        mon.note(gap)


# ---------------------------------------------------------------- arithmetic

def add(a, b):
    a, b = as_node(a), as_node(b)
    return _make(a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_node(a), as_node(b)
    return _make(a.value - b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b):
    a, b = as_node(a), as_node(b)
    return _make(a.value * b.value, (a, b),
                 lambda g: (_unbroadcast(g * b.value, a.shape),
                            _unbroadcast(g * a.value, b.shape)))


def div(a, b):
    a, b = as_node(a), as_node(b)
    out = a.value / b.value
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.value, a.shape),
                            _unbroadcast(-g * out / b.value, b.shape)))


def neg(a):
    a = as_node(a)
    return _make(-a.value, (a,), lambda g: (-g,))


def matmul(a, b):
    """``a @ b`` for a vector or matrix ``a`` and a matrix ``b``."""
    a, b = as_node(a), as_node(b)
    if b.value.ndim != 2 or a.value.ndim not in (1, 2):
        raise ValueError(f"matmul expects (n, d) or (d,) @ (d, m), got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def rule(g):
        if a.value.ndim == 1:
            return g @ b.value.T, np.outer(a.value, g)
        return g @ b.value.T, a.value.T @ g

    return _make(a.value @ b.value, (a, b), rule)


def dense(x, weights, bias):
    """Affine layer ``x @ W + b``."""
    x, weights, bias = as_node(x), as_node(weights), as_node(bias)
    if weights.value.ndim != 2:
        raise ValueError(f"weights must be a matrix, got shape {weights.shape}")
    if x.shape[-1] != weights.shape[0]:
        raise ValueError(f"input width {x.shape[-1]} does not match weights {weights.shape}")
    if bias.shape != (weights.shape[1],):
        raise ValueError(f"bias shape {bias.shape} does not match weights {weights.shape}")
    return add(matmul(x, weights), bias)


def sum_(a, axis=None):
    a = as_node(a)

    def rule(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(a.value.sum(axis=axis), (a,), rule)


def mean(a, axis=None):
    a = as_node(a)
    count = a.value.size if axis is None else a.shape[axis]
    return sum_(a, axis) * (1.0 / count)


def take(a, key):
    """Basic (slice) indexing."""
    a = as_node(a)

    def rule(g):
        full = np.zeros(a.shape)
        full[key] += g
        return (full,)

    return _make(a.value[key], (a,), rule)


def gather(a, index):
    """Pick ``a[i, index[i]]`` for every row (0-based column indices)."""
    a = as_node(a)
    index = np.asarray(index, dtype=np.int64)
    if a.value.ndim == 1:
        rows = None
        value = a.value[index]
    else:
        if index.shape != (a.shape[0],):
            raise ValueError(f"need one index per row, got {index.shape} for {a.shape}")
        rows = np.arange(a.shape[0])
        value = a.value[rows, index]

    def rule(g):
        full = np.zeros(a.shape)
        if rows is None:
            np.add.at(full, index, g)
        else:
            full[rows, index] += g
        return (full,)

    return _make(value, (a,), rule)


# -------------------------------------------------------------- elementwise

def exp(a):
    a = as_node(a)
    out = np.exp(a.value)
    return _make(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_node(a)
    return _make(np.log(a.value), (a,), lambda g: (g / a.value,))


def clamp_log(a, floor=LOG_FLOOR):
    """``log(max(a, floor))``; no gradient flows through the clamped region."""
    a = as_node(a)
    kept = a.value > floor
    if _MONITORS:
        _note_kink(a.value - floor)
    safe = np.where(kept, a.value, floor)
    return _make(np.log(safe), (a,), lambda g: (np.where(kept, g / safe, 0.0),))


def relu(a):
    """``max(a, 0)`` with derivative 0 at the kink."""
    a = as_node(a)
    on = a.value > 0
    if _MONITORS:
        _note_kink(a.value)
    return _make(np.where(on, a.value, 0.0), (a,), lambda g: (g * on,))


def softplus(a):
    a = as_node(a)
    return _make(np.logaddexp(0.0, a.value), (a,), lambda g: (g * expit(a.value),))


def sigmoid(a):
    a = as_node(a)
    out = expit(a.value)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def abs_(a, dead_zone=0.0):
    """``|a|`` whose derivative is 0 wherever ``|a| <= dead_zone``."""
    a = as_node(a)
    sign = np.where(np.abs(a.value) <= dead_zone, 0.0, np.sign(a.value))
    if _MONITORS:
        _note_kink(a.value)
    return _make(np.abs(a.value), (a,), lambda g: (g * sign,))


def elementwise_min(a, b):
    """Elementwise minimum; on ties the gradient goes to ``a``."""
    a, b = as_node(a), as_node(b)
    if a.shape != b.shape:
        raise ValueError(f"elementwise_min needs equal shapes, got {a.shape} and {b.shape}")
    pick_a = a.value <= b.value
    if _MONITORS:
        _note_kink(a.value - b.value)
    return _make(np.where(pick_a, a.value, b.value), (a, b),
                 lambda g: (g * pick_a, g * ~pick_a))


# ------------------------------------------------------------ row-wise ops

def softmax(a):
    a = as_node(a)
    z = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def rule(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _make(out, (a,), rule)


def log_softmax(a):
    a = as_node(a)
    z = a.value - a.value.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    probs = np.exp(out)

    def rule(g):
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return _make(out, (a,), rule)


def _suffix_sum(x):
    return np.flip(np.cumsum(np.flip(x, axis=-1), axis=-1), axis=-1)


def cumsum_forward(a):
    """Prefix sums along the last axis."""
    a = as_node(a)
    return _make(np.cumsum(a.value, axis=-1), (a,), lambda g: (_suffix_sum(g),))


def cumsum_reverse(a):
    """Suffix sums along the last axis: ``out[i] = a[i] + ... + a[K-1]``."""
    a = as_node(a)
    return _make(_suffix_sum(a.value), (a,), lambda g: (np.cumsum(g, axis=-1),))


# ------------------------------------------------------------------ backward

def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every gradient leaf."""
    if not isinstance(loss, Node):
        raise TypeError("backward expects a Node")
    if loss.value.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    adjoint = {id(loss): np.ones(loss.shape)}
    for node in reversed(_topological_order(loss)):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        if not node._parents:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad or pg is None:
                continue
            pg = np.asarray(pg, dtype=np.float64).reshape(parent.shape)
            key = id(parent)
            adjoint[key] = pg if key not in adjoint else adjoint[key] + pg


# ---------------------------------------------------------------- parameters

class ParameterSet:
    """Named trainable tensors, each stored as a gradient leaf."""

    def __init__(self, arrays=None, trainable=None):
        self._nodes = OrderedDict()
        self._trainable = {}
        for name, value in (arrays or {}).items():
            self.add(name, value, True if trainable is None else trainable.get(name, True))

    def add(self, name, value, trainable=True):
        if name in self._nodes:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._nodes[name] = Node(np.array(value, dtype=np.float64), requires_grad=trainable,
                                 name=name)
        self._trainable[name] = bool(trainable)
        return self._nodes[name]

    def __getitem__(self, name):
        return self._nodes[name]

    def __contains__(self, name):
        return name in self._nodes

    def __iter__(self):
        return iter(self._nodes)

    def __len__(self):
        return len(self._nodes)

    def names(self, trainable_only=False):
        return [n for n in self._nodes if self._trainable[n] or not trainable_only]

    def is_trainable(self, name):
        return self._trainable[name]

    def set_value(self, name, value):
        value = np.asarray(value, dtype=np.float64)
        node = self._nodes[name]
        if value.shape != node.shape:
            raise ValueError(f"{name!r} has shape {node.shape}; got {value.shape}")
        node.value = value.copy()

    def values(self):
        return {n: node.value for n, node in self._nodes.items()}

    def grads(self):
        """Gradient per trainable parameter (zeros where none accumulated)."""
        return {n: (node.grad if node.grad is not None else np.zeros(node.shape))
                for n, node in self._nodes.items() if self._trainable[n]}

    def zero_grad(self):
        for node in self._nodes.values():
            node.grad = None

    def copy(self):
        return ParameterSet({n: node.value.copy() for n, node in self._nodes.items()},
                            dict(self._trainable))

    @property
    def n_values(self):
        return int(sum(node.value.size for node in self._nodes.values()))


def glorot_uniform(fan_in, fan_out, rng):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


# ---------------------------------------------------------------------- Adam

class AdamState:
    """Moment estimates and step count for :func:`adam_step`."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0 or not (0 <= beta1 < 1) or not (0 <= beta2 < 1) or eps <= 0:
            raise ValueError("invalid Adam hyperparameters")
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step = 0
        self.m = {n: np.zeros(params[n].shape) for n in params.names(trainable_only=True)}
        self.v = {n: np.zeros(params[n].shape) for n in params.names(trainable_only=True)}


def adam_step(params, grads, state):
    """One bias-corrected Adam update, applied in place. Returns ``(params, state)``."""
    missing = set(state.m) - set(grads)
    if missing:
        raise ValueError(f"missing gradients for {sorted(missing)}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name in state.m:
        g = np.asarray(grads[name], dtype=np.float64)
        node = params[name]
        if g.shape != node.shape:
            raise ValueError(f"gradient for {name!r} has shape {g.shape}, expected {node.shape}")
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / (1 - b1 ** t)
        v_hat = state.v[name] / (1 - b2 ** t)
        node.value = node.value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


# --------------------------------------------------------- gradient checking

def finite_difference_check(fn, params, eps=1e-5):
    """Largest relative gap between autodiff and central-difference gradients.

    ``fn(params)`` must build and return a scalar node. The error for one
    coordinate is ``|analytic - numeric| / max(1e-8, |numeric|)``.
    """
    params.zero_grad()
    backward(fn(params))
    analytic = params.grads()
    worst = 0.0
    for name in params.names(trainable_only=True):
        node = params[name]
        base = node.value.copy()
        flat = base.ravel()
        for i in range(flat.size):
            bumped = flat.copy()
            bumped[i] = flat[i] + eps
            node.value = bumped.reshape(base.shape)
            f_plus = float(fn(params))
            bumped[i] = flat[i] - eps
            node.value = bumped.reshape(base.shape)
            f_minus = float(fn(params))
            numeric = (f_plus - f_minus) / (2 * eps)
            err = abs(analytic[name].ravel()[i] - numeric) / max(1e-8, abs(numeric))
            worst = max(worst, err)
        node.value = base
    params.zero_grad()
    return worst
