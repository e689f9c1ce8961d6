"""Minimal dense tensor library with recorded-tape reverse-mode autodiff.

Just enough machinery for a small Transformer encoder: matmul, elementwise
arithmetic, softmax, layer norm, GELU, embedding gather, slicing/concat and
cross-entropy. Forward passes run inside a ``Tape`` context; ``backward``
replays the tape in reverse and accumulates gradients into every tensor that
requires them. Tapes are per-forward-pass and discarded afterwards; there are
no higher-order gradients.

Default precision is float32. Gradient checking (``grad_check``) expects
float64 tensors so central differences stay meaningful.
"""

from __future__ import annotations

import math

import numpy as np

DEFAULT_DTYPE = np.float32

# Matmul FLOP instrumentation (multiplications + additions), used to verify
# the analytic cost model against the real forward pass.
_FLOP_COUNTER_STACK: list[list[int]] = []


class FlopCounter:
    """Context manager counting multiply+add operations of every matmul."""

    def __init__(self):
        self.flops = 0

    def __enter__(self):
        _FLOP_COUNTER_STACK.append([0])
        return self

    def __exit__(self, *exc):
        self.flops = _FLOP_COUNTER_STACK.pop()[0]
        return False


def _record_matmul_flops(m, k, n):
    if _FLOP_COUNTER_STACK:
        _FLOP_COUNTER_STACK[-1][0] += 2 * m * k * n


class Tape:
    """Ordered record of operations for one forward pass.

    Each entry is ``(output, inputs, backward_fn)`` where ``backward_fn``
    takes the output gradient and returns one gradient array (or None) per
    input. Entries are appended in execution order, so reverse iteration is
    a valid reverse-topological order.
    """

    def __init__(self):
        self.ops = []

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()
        return False

    def __len__(self):
        return len(self.ops)


_TAPE_STACK: list[Tape] = []


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tensor:
    """Dense n-dimensional array participating in recorded computation."""

    __slots__ = ("data", "requires_grad", "grad", "tape")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype)
        elif not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        self.grad = None

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Convenience operators; constants are wrapped as non-grad tensors.
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __mul__(self, other):
        return mul(self, _as_tensor(other, self.dtype))

    def __rmul__(self, other):
        return mul(_as_tensor(other, self.dtype), self)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _record(out, inputs, backward_fn):
    tape = _active_tape()
    needs = any(t.requires_grad for t in inputs)
    if tape is not None and needs:
        out.requires_grad = True
        out.tape = tape
        tape.ops.append((out, inputs, backward_fn))
    return out


def _accumulate(tensor, grad):
    if grad is None or not tensor.requires_grad:
        return
    grad = np.asarray(grad, dtype=tensor.data.dtype)
    if tensor.grad is None:
        tensor.grad = grad.copy()
    else:
        tensor.grad = tensor.grad + grad


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class ShapeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Primitive operations
# ---------------------------------------------------------------------------


def add(a, b):
    out = Tensor(a.data + b.data)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record(out, (a, b), backward)


def sub(a, b):
    out = Tensor(a.data - b.data)

    def backward(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return _record(out, (a, b), backward)


def mul(a, b):
    out = Tensor(a.data * b.data)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record(out, (a, b), backward)


def scale(a, s):
    """Multiply by a python scalar (not recorded as a tensor input)."""
    out = Tensor(a.data * s)

    def backward(g):
        return (g * s,)

    return _record(out, (a,), backward)


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    m, k = a.shape
    n = b.shape[1]
    _record_matmul_flops(m, k, n)
    out = Tensor(a.data @ b.data)

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _record(out, (a, b), backward)


def transpose(a):
    out = Tensor(a.data.T)

    def backward(g):
        return (g.T,)

    return _record(out, (a,), backward)


def reshape(a, shape):
    old = a.shape
    out = Tensor(a.data.reshape(shape))

    def backward(g):
        return (g.reshape(old),)

    return _record(out, (a,), backward)


def narrow(a, axis, start, length):
    """Contiguous slice along ``axis`` (2D tensors)."""
    if axis == 0:
        out = Tensor(a.data[start:start + length])
    elif axis == 1:
        out = Tensor(a.data[:, start:start + length])
    else:
        raise ShapeError(f"narrow supports axis 0/1, got {axis}")

    def backward(g):
        full = np.zeros_like(a.data)
        if axis == 0:
            full[start:start + length] = g
        else:
            full[:, start:start + length] = g
        return (full,)

    return _record(out, (a,), backward)


def concat(tensors, axis=0):
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]

    def backward(g):
        grads = []
        offset = 0
        for size in sizes:
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offset, offset + size)
            grads.append(g[tuple(sl)])
            offset += size
        return tuple(grads)

    return _record(out, tuple(tensors), backward)


def take(a, indices):
    """Row gather (embedding lookup); gradient scatter-adds into the table."""
    idx = np.asarray(indices, dtype=np.int64)
    out = Tensor(a.data[idx])

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _record(out, (a,), backward)


def tsum(a, axis=None, keepdims=False):
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def backward(g):
        if axis is None:
            return (np.full_like(a.data, g),)
        g = np.asarray(g)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record(out, (a,), backward)


def softmax(a, axis=-1):
    x = a.data
    if np.isnan(x).any():
        raise ValueError("softmax received NaN input")
    shifted = x - x.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    s = ex / ex.sum(axis=axis, keepdims=True)
    out = Tensor(s)

    def backward(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - dot),)

    return _record(out, (a,), backward)


def layer_norm(x, gain, bias, eps=1e-12):
    """Normalize the last axis to zero mean / unit variance, then affine."""
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise ShapeError(
            f"layer_norm gain/bias {gain.shape}/{bias.shape} must match last dim of {x.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = Tensor(xhat * gain.data + bias.data)

    def backward(g):
        d = x.shape[-1]
        dxhat = g * gain.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        lead = tuple(range(g.ndim - 1))
        dgain = (g * xhat).sum(axis=lead)
        dbias = g.sum(axis=lead)
        return dx, dgain, dbias

    return _record(out, (x, gain, bias), backward)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x):
    """Tanh-approximation GELU (the approximation choice is pinned by tests)."""
    u = _GELU_C * (x.data + 0.044715 * x.data ** 3)
    t = np.tanh(u)
    out = Tensor(0.5 * x.data * (1.0 + t))

    def backward(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * x.data ** 2)
        dy = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t ** 2) * du
        return (g * dy,)

    return _record(out, (x,), backward)


def dropout(x, rate, rng):
    """Inverted dropout; pass rate=0 or call only in training paths."""
    if rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)
    out = Tensor(x.data * keep)

    def backward(g):
        return (g * keep,)

    return _record(out, (x,), backward)


def cross_entropy(logits, label):
    """Negative log softmax probability of ``label``; logits is a vector."""
    z = logits.data.reshape(-1)
    if label < 0 or label >= z.size:
        raise ValueError(f"label {label} out of range for {z.size} logits")
    if not np.isfinite(z).all():
        raise ValueError("cross_entropy received non-finite logits")
    m = z.max()
    lse = m + math.log(np.exp(z - m).sum())
    out = Tensor(np.asarray(lse - z[label], dtype=logits.dtype))

    def backward(g):
        p = np.exp(z - m)
        p = p / p.sum()
        p[label] -= 1.0
        return (np.asarray(g) * p.reshape(logits.shape),)

    return _record(out, (logits,), backward)


# ---------------------------------------------------------------------------
# Backward pass and gradient checking
# ---------------------------------------------------------------------------


def backward(loss):
    """Populate ``grad`` on every requires_grad tensor reachable from ``loss``."""
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    tape = loss.tape
    if tape is None:
        raise ValueError("loss was not recorded on a tape")
    loss.grad = np.ones_like(loss.data)
    for out, inputs, backward_fn in reversed(tape.ops):
        if out.grad is None:
            continue
        grads = backward_fn(out.grad)
        for tensor, grad in zip(inputs, grads):
            _accumulate(tensor, grad)


def grad_check(f, params, eps=1e-5):
    """Compare analytic gradients of scalar ``f()`` against central differences.

    ``params`` are float64 requires_grad tensors read by ``f``. Returns the
    worst relative error over every parameter element.
    """
    params = list(params)
    for p in params:
        if p.dtype != np.float64:
            raise ValueError("grad_check requires float64 parameters")
        p.zero_grad()
    with Tape():
        loss = f()
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(f().data)
            flat[i] = orig - eps
            lo = float(f().data)
            flat[i] = orig
            num = (hi - lo) / (2 * eps)
            a = ana.reshape(-1)[i]
            rel = abs(a - num) / max(abs(a), abs(num), 1.0)
            worst = max(worst, rel)
    return worst
