"""Minimal dense-tensor reverse-mode autodiff on numpy buffers.

Dynamic tape: every op returns a Tensor holding its inputs and a closure
that scatters the incoming gradient back to them. The operator set is
exactly what the sentence encoders need. float32 by default; gradient
checking switches to float64 via use_dtype().
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_DTYPE = np.float32


def current_dtype():
    return _DTYPE


@contextmanager
def use_dtype(dtype):
    global _DTYPE
    old = _DTYPE
    _DTYPE = np.dtype(dtype).type
    try:
        yield
    finally:
        _DTYPE = old


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=None):
        self.data = np.asarray(data, dtype=_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward requires a scalar loss, got shape %s" % (self.shape,))
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
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self._accum(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return "Tensor(shape=%s, requires_grad=%s)" % (self.shape, self.requires_grad)


def param(data, name=None):
    return Tensor(data, requires_grad=True, name=name)


def constant(data):
    return Tensor(data)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, dim in enumerate(shape):
        if dim == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, parents=(a, b), backward=back)


def sub(a, b):
    return add(a, scale(b, -1.0))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, parents=(a, b), backward=back)


def scale(a, s):
    a = _as_tensor(a)
    s = _DTYPE(s)

    def back(g):
        if a.requires_grad:
            a._accum(g * s)

    return Tensor(a.data * s, parents=(a,), backward=back)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data @ b.data

    def back(g):
        if a.requires_grad:
            if a.data.ndim == 1:
                a._accum(g @ b.data.T)
            else:
                a._accum(g @ b.data.T)
        if b.requires_grad:
            if a.data.ndim == 1:
                b._accum(np.outer(a.data, g))
            else:
                b._accum(a.data.T @ g)

    return Tensor(out_data, parents=(a, b), backward=back)


def transpose(a):
    a = _as_tensor(a)

    def back(g):
        if a.requires_grad:
            a._accum(g.T)

    return Tensor(a.data.T, parents=(a,), backward=back)


def tanh(a):
    a = _as_tensor(a)
    out_data = np.tanh(a.data)

    def back(g):
        if a.requires_grad:
            a._accum(g * (1.0 - out_data * out_data))

    return Tensor(out_data, parents=(a,), backward=back)


def sigmoid(a):
    a = _as_tensor(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def back(g):
        if a.requires_grad:
            a._accum(g * out_data * (1.0 - out_data))

    return Tensor(out_data, parents=(a,), backward=back)


def relu(a):
    a = _as_tensor(a)
    mask = a.data > 0
    out_data = a.data * mask

    def back(g):
        if a.requires_grad:
            a._accum(g * mask)

    return Tensor(out_data, parents=(a,), backward=back)


def reshape(a, shape):
    a = _as_tensor(a)
    in_shape = a.data.shape

    def back(g):
        if a.requires_grad:
            a._accum(g.reshape(in_shape))

    return Tensor(a.data.reshape(shape), parents=(a,), backward=back)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([0] + sizes)

    def back(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accum(g[tuple(idx)])

    return Tensor(out_data, parents=tuple(tensors), backward=back)


def gather_rows(a, idx):
    """Index rows of a 2-D tensor with an integer array (any idx shape)."""
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    out_data = a.data[idx]

    def back(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, idx, g)

    return Tensor(out_data, parents=(a,), backward=back)


def slice_rows(a, start, stop):
    a = _as_tensor(a)

    def back(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[start:stop] += g

    return Tensor(a.data[start:stop], parents=(a,), backward=back)


def slice_cols(a, start, stop):
    a = _as_tensor(a)

    def back(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[..., start:stop] += g

    return Tensor(a.data[..., start:stop], parents=(a,), backward=back)


def amax(a, axis=0):
    """Max along an axis; gradient flows to the first argmax per slice."""
    a = _as_tensor(a)
    out_data = a.data.max(axis=axis)
    arg = a.data.argmax(axis=axis)

    def back(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            grid = np.indices(out_data.shape)
            index = list(grid)
            index.insert(axis, arg)
            np.add.at(a.grad, tuple(index), g)

    return Tensor(out_data, parents=(a,), backward=back)


def sum_all(a):
    a = _as_tensor(a)

    def back(g):
        if a.requires_grad:
            a._accum(np.full_like(a.data, g))

    return Tensor(a.data.sum(), parents=(a,), backward=back)


def sum_axis(a, axis=0):
    a = _as_tensor(a)

    def back(g):
        if a.requires_grad:
            a._accum(np.repeat(np.expand_dims(g, axis), a.data.shape[axis], axis=axis))

    return Tensor(a.data.sum(axis=axis), parents=(a,), backward=back)


def softmax(a):
    """Row-wise softmax over the last axis."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        if a.requires_grad:
            dot = (g * out_data).sum(axis=-1, keepdims=True)
            a._accum(out_data * (g - dot))

    return Tensor(out_data, parents=(a,), backward=back)


def cross_entropy_logits(logits, labels):
    """Mean negative log-likelihood of integer labels under softmax(logits).

    logits: (N, C) or (C,); labels: length-N int array (scalar for (C,)).
    """
    logits = _as_tensor(logits)
    x = logits.data
    if x.ndim == 1:
        x = x[None, :]
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n = x.shape[0]
    shifted = x - x.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    loss = -logp[np.arange(n), labels].mean()
    probs = np.exp(logp)

    def back(g):
        if logits.requires_grad:
            d = probs.copy()
            d[np.arange(n), labels] -= 1.0
            d *= g / n
            logits._accum(d.reshape(logits.data.shape))

    return Tensor(loss, parents=(logits,), backward=back)


def dropout(a, p, rng, train):
    """Inverted dropout: train-mode expectation equals the input."""
    a = _as_tensor(a)
    if not train or p <= 0.0:
        return a
    keep = 1.0 - p
    mask = (rng.random(a.data.shape) < keep).astype(a.data.dtype) / _DTYPE(keep)
    return mul(a, Tensor(mask))


def linear(x, w, b=None):
    out = matmul(x, w)
    return add(out, b) if b is not None else out


def conv1d(x, w, b=None):
    """Valid 1-d convolution over rows of x (T, d) with filters w (k*d, F).

    x is zero-padded on the right when T < k so at least one window exists.
    """
    k = w.data.shape[0] // x.data.shape[1]
    t, d = x.data.shape
    if t < k:
        pad = Tensor(np.zeros((k - t, d)))
        x = concat([x, pad], axis=0)
        t = k
    idx = np.arange(t - k + 1)[:, None] + np.arange(k)[None, :]
    windows = reshape(gather_rows(x, idx), (t - k + 1, k * d))
    return linear(windows, w, b)


def gradcheck(fn, params, eps=1e-5):
    """Max relative error between analytic and central-difference gradients.

    fn rebuilds the scalar loss from `params` (dict name -> Tensor) on every
    call; must be deterministic. Run under use_dtype(np.float64).
    """
    for p in params.values():
        p.zero_grad()
    loss = fn()
    if not np.isfinite(loss.data).all():
        raise ValueError("non-finite loss in gradcheck")
    loss.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}
    max_err = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        ana = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = fn().item()
            flat[i] = orig - eps
            lm = fn().item()
            flat[i] = orig
            num = (lp - lm) / (2.0 * eps)
            if not np.isfinite(num):
                raise ValueError("non-finite numeric gradient for %s[%d]" % (name, i))
            err = abs(ana[i] - num) / max(1.0, abs(ana[i]), abs(num))
            max_err = max(max_err, err)
    return max_err
