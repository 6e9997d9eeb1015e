"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 array; every operation on tensors that require
gradients records its parents and a VJP closure, forming the tape.  Calling
``backward()`` on a scalar tensor walks the tape in reverse topological
order and accumulates gradients into ``.grad`` of every tensor that
requested them.  The heavy inner loops (softmax, the time-embedding
evaluation, the pulse activation) run through :mod:`timerep.kernels`.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .learned import PulseTransformSpec

MASK_NEG = -1e9  # additive pre-softmax logit for masked keys


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_vjp", "name")

    def __init__(self, value, requires_grad=False, _parents=(), _vjp=None, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._vjp = _vjp
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.value.shape}{tag})"

    # -- graph ------------------------------------------------------------

    def backward(self):
        """Reverse-accumulate gradients from this scalar through the tape."""
        if self.value.ndim != 0 and self.value.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        if not self._parents:
            raise RuntimeError(
                "backward() called on a tensor with no recorded operations; "
                "run a forward pass first"
            )
        order = []
        seen = set()
        stack = [(self, False)]
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
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.ones_like(self.value)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._vjp is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        other = as_tensor(other)
        return mul(self, power(other, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def swapaxes(self, a, b):
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return transpose(self, tuple(axes))


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value, parents, vjp):
    track = any(p.requires_grad or p._parents for p in parents)
    if not track:
        return Tensor(value)
    return Tensor(value, requires_grad=False, _parents=tuple(parents), _vjp=vjp)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise -----------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)),
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.value * b.value,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        ),
    )


def power(a, p):
    a = as_tensor(a)
    out = a.value ** p
    return _make(out, (a,), lambda g: (g * p * a.value ** (p - 1.0),))


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.value)
    return _make(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    return _make(np.log(a.value), (a,), lambda g: (g / a.value,))


def sin(a):
    a = as_tensor(a)
    return _make(np.sin(a.value), (a,), lambda g: (g * np.cos(a.value),))


def sqrt(a):
    return power(a, 0.5)


def relu(a):
    a = as_tensor(a)
    keep = a.value > 0.0
    return _make(a.value * keep, (a,), lambda g: (g * keep,))


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.value)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


# -- shape -----------------------------------------------------------------

def reshape(a, shape):
    a = as_tensor(a)
    old = a.value.shape
    return _make(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a, axes):
    a = as_tensor(a)
    inv = tuple(np.argsort(axes))
    return _make(a.value.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def getitem(a, idx):
    a = as_tensor(a)

    def vjp(g):
        out = np.zeros_like(a.value)
        np.add.at(out, idx, g)
        return (out,)

    return _make(a.value[idx], (a,), vjp)


def concat(tensors, axis):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.value.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.value for t in tensors], axis=axis), tensors, vjp)


# -- reductions ------------------------------------------------------------

def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        gg = np.asarray(g)
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        return (np.broadcast_to(gg, a.value.shape).copy(),)

    return _make(out, (a,), vjp)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.value.size if axis is None else a.value.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# -- linear algebra ----------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = np.matmul(a.value, b.value)

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.value, -1, -2))
        gb = np.matmul(np.swapaxes(a.value, -1, -2), g)
        return (_unbroadcast(ga, a.value.shape), _unbroadcast(gb, b.value.shape))

    return _make(out, (a, b), vjp)


# -- fused ops over kernels --------------------------------------------------

def softmax_lastaxis(a):
    """Softmax over the last axis, any leading shape."""
    a = as_tensor(a)
    flat = a.value.reshape(-1, a.value.shape[-1])
    w = kernels.softmax_rows(flat)

    def vjp(g):
        gf = g.reshape(-1, g.shape[-1])
        return (kernels.softmax_rows_grad(w, gf).reshape(a.value.shape),)

    return _make(w.reshape(a.value.shape), (a,), vjp)


def time_embedding(t: np.ndarray, omega: Tensor, alpha: Tensor):
    """phi evaluated on constant times t (n,) -> (n, d); grads to omega/alpha."""
    t = np.ascontiguousarray(t, dtype=np.float64)
    out = kernels.phi_forward(t, omega.value, alpha.value)

    def vjp(g):
        _, d_omega, d_alpha = kernels.phi_backward(t, omega.value, alpha.value, g)
        return (d_omega, d_alpha)

    return _make(out, (omega, alpha), vjp)


def pulse_rows(x, spec: PulseTransformSpec):
    """Percentile pulse applied per row of x (rows = representations)."""
    x = as_tensor(x)
    out, v = kernels.pulse_forward(x.value, spec.peak_index, spec.percentile)

    def vjp(g):
        return (
            kernels.pulse_backward(x.value, v, spec.peak_index, spec.percentile, g),
        )

    return _make(out, (x,), vjp)


def masked_cross_entropy(logits, labels: np.ndarray, mask: np.ndarray, weights=None):
    """Mean cross-entropy over unmasked positions.

    logits: (..., C) tensor; labels/mask: matching leading shape.  Optional
    per-position weights (e.g. class weights) scale each term; the mean is
    taken over the total weight.
    """
    logits = as_tensor(logits)
    c = logits.value.shape[-1]
    flat = logits.value.reshape(-1, c)
    lab = np.asarray(labels).reshape(-1).astype(np.int64)
    msk = np.asarray(mask).reshape(-1).astype(np.float64)
    if weights is not None:
        msk = msk * np.asarray(weights, dtype=np.float64).reshape(-1)
    total = msk.sum()
    if total <= 0.0:
        raise ValueError("masked_cross_entropy: no unmasked positions")
    m = flat.max(axis=1, keepdims=True)
    z = flat - m
    lse = np.log(np.exp(z).sum(axis=1)) + m[:, 0]
    nll = lse - flat[np.arange(flat.shape[0]), lab]
    loss = float((nll * msk).sum() / total)

    def vjp(g):
        p = kernels.softmax_rows(flat)
        p[np.arange(flat.shape[0]), lab] -= 1.0
        p *= (msk / total)[:, None]
        return (float(g) * p.reshape(logits.value.shape),)

    return _make(np.float64(loss), (logits,), vjp)


def dropout(a, p: float, rng: np.random.Generator):
    """Inverted dropout; identity when p == 0."""
    if p <= 0.0:
        return as_tensor(a)
    a = as_tensor(a)
    keep = (rng.random(a.value.shape) >= p) / (1.0 - p)
    return mul(a, keep)
