"""Reverse-mode autodiff over dense numpy arrays.

A ``Tape`` records primitive ops in execution order; ``Tape.backward``
replays them in reverse, accumulating gradients into every ``Value``
that contributed to the loss. Values are immutable once produced.

The primitive set is fixed (no general broadcasting). Fused primitives
exist for the LSTM cell and softmax cross-entropy because they dominate
the op count during training.
"""

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible with an op."""


class Value:
    """A node in the computation: an ndarray plus its accumulated gradient."""

    __slots__ = ("data", "grad", "tape")

    def __init__(self, data, tape):
        self.data = data
        self.grad = None
        self.tape = tape

    @property
    def shape(self):
        return self.data.shape

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Value(shape={self.data.shape})"


class Tape:
    """Ordered record of ops; supports one backward pass per forward build."""

    def __init__(self):
        self._nodes = []

    def value(self, data):
        """Wrap an array as a leaf (input or parameter) on this tape."""
        arr = np.asarray(data, dtype=np.float64)
        return Value(arr, self)

    def record(self, outputs, backward_fn):
        self._nodes.append((outputs, backward_fn))

    def backward(self, loss):
        """Accumulate d(loss)/d(node) into every reachable Value's .grad.

        Visits each recorded node exactly once, in reverse execution
        order; nodes whose outputs received no gradient are skipped.
        """
        if loss.data.shape != ():
            raise ShapeError(f"backward: loss must be scalar, got {loss.data.shape}")
        loss.grad = np.ones((), dtype=np.float64)
        for outputs, backward_fn in reversed(self._nodes):
            if any(o.grad is not None for o in outputs):
                backward_fn()

    def __len__(self):
        return len(self._nodes)


def _tape_of(*values):
    tape = values[0].tape
    for v in values[1:]:
        if v.tape is not tape:
            raise ValueError("operands recorded on different tapes")
    return tape


def _accumulate(value, grad):
    if value.grad is None:
        value.grad = np.zeros_like(value.data)
    value.grad += grad


def add(a, b):
    """Elementwise sum of two same-shaped Values."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add: {a.data.shape} vs {b.data.shape}")
    tape = _tape_of(a, b)
    out = Value(a.data + b.data, tape)

    def backward():
        g = out.grad
        _accumulate(a, g)
        _accumulate(b, g)

    tape.record((out,), backward)
    return out


def mul(a, b):
    """Elementwise (Hadamard) product of two same-shaped Values."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul: {a.data.shape} vs {b.data.shape}")
    tape = _tape_of(a, b)
    out = Value(a.data * b.data, tape)

    def backward():
        g = out.grad
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    tape.record((out,), backward)
    return out


def matmul(a, b):
    """Matrix product: (m,n)@(n,) -> (m,) or (m,n)@(n,p) -> (m,p)."""
    if a.data.ndim != 2 or b.data.ndim not in (1, 2) or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: {a.data.shape} @ {b.data.shape}")
    tape = _tape_of(a, b)
    out = Value(a.data @ b.data, tape)

    def backward():
        g = out.grad
        if b.data.ndim == 1:
            _accumulate(a, np.outer(g, b.data))
            _accumulate(b, a.data.T @ g)
        else:
            _accumulate(a, g @ b.data.T)
            _accumulate(b, a.data.T @ g)

    tape.record((out,), backward)
    return out


def tanh(a):
    tape = a.tape
    t = np.tanh(a.data)
    out = Value(t, tape)

    def backward():
        _accumulate(a, out.grad * (1.0 - t * t))

    tape.record((out,), backward)
    return out


def sigmoid(a):
    tape = a.tape
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = Value(s, tape)

    def backward():
        _accumulate(a, out.grad * s * (1.0 - s))

    tape.record((out,), backward)
    return out


def concat(*values):
    """Concatenate 1-D Values."""
    for v in values:
        if v.data.ndim != 1:
            raise ShapeError(f"concat: expected 1-D operands, got {v.data.shape}")
    tape = _tape_of(*values)
    out = Value(np.concatenate([v.data for v in values]), tape)
    sizes = [v.data.shape[0] for v in values]

    def backward():
        g = out.grad
        ofs = 0
        for v, n in zip(values, sizes):
            _accumulate(v, g[ofs:ofs + n])
            ofs += n

    tape.record((out,), backward)
    return out


def vslice(a, start, stop):
    """Contiguous slice of a 1-D Value."""
    if a.data.ndim != 1:
        raise ShapeError(f"slice: expected 1-D operand, got {a.data.shape}")
    if not (0 <= start <= stop <= a.data.shape[0]):
        raise ShapeError(f"slice: [{start}:{stop}] out of range for {a.data.shape}")
    tape = a.tape
    out = Value(a.data[start:stop].copy(), tape)

    def backward():
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        a.grad[start:stop] += out.grad

    tape.record((out,), backward)
    return out


def scale(a, k):
    """Multiply by a python constant (no gradient flows into k)."""
    tape = a.tape
    k = float(k)
    out = Value(a.data * k, tape)

    def backward():
        _accumulate(a, out.grad * k)

    tape.record((out,), backward)
    return out


def asum(a):
    """Sum of all elements, as a scalar Value."""
    tape = a.tape
    out = Value(np.asarray(a.data.sum()), tape)

    def backward():
        _accumulate(a, np.full_like(a.data, out.grad))

    tape.record((out,), backward)
    return out


def add_n(values):
    """Sum a non-empty list of same-shaped Values."""
    if not values:
        raise ValueError("add_n: empty operand list")
    first = values[0]
    for v in values[1:]:
        if v.data.shape != first.data.shape:
            raise ShapeError(f"add_n: {v.data.shape} vs {first.data.shape}")
    tape = _tape_of(*values)
    total = values[0].data.copy()
    for v in values[1:]:
        total += v.data
    out = Value(total, tape)

    def backward():
        g = out.grad
        for v in values:
            _accumulate(v, g)

    tape.record((out,), backward)
    return out


def maxpool(values):
    """Per-dimension max over a list of same-shaped 1-D Values.

    Gradient routes to the first timestep attaining the max in each
    dimension, which keeps the backward pass deterministic under ties.
    """
    if not values:
        raise ValueError("maxpool: empty operand list")
    for v in values:
        if v.data.shape != values[0].data.shape or v.data.ndim != 1:
            raise ShapeError(f"maxpool: expected same-shaped 1-D operands, got {v.data.shape}")
    tape = _tape_of(*values)
    stacked = np.stack([v.data for v in values])
    arg = np.argmax(stacked, axis=0)
    cols = np.arange(stacked.shape[1])
    out = Value(stacked[arg, cols], tape)

    def backward():
        g = out.grad
        for t, v in enumerate(values):
            mask = arg == t
            if mask.any():
                if v.grad is None:
                    v.grad = np.zeros_like(v.data)
                v.grad[mask] += g[mask]

    tape.record((out,), backward)
    return out


def embed(table, index):
    """Fetch one row of an embedding table; gradient is sparse in rows."""
    if table.data.ndim != 2:
        raise ShapeError(f"embed: table must be 2-D, got {table.data.shape}")
    if not (0 <= index < table.data.shape[0]):
        raise IndexError(f"embed: row {index} out of range for table {table.data.shape}")
    tape = table.tape
    out = Value(table.data[index].copy(), tape)

    def backward():
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        table.grad[index] += out.grad

    tape.record((out,), backward)
    return out


def softmax_xent(logits, target):
    """Cross-entropy -log softmax(logits)[target], max-stabilized.

    Gradient of the loss w.r.t. logits is softmax(logits) - onehot(target).
    """
    if logits.data.ndim != 1:
        raise ShapeError(f"softmax_xent: logits must be 1-D, got {logits.data.shape}")
    n = logits.data.shape[0]
    if not (0 <= target < n):
        raise IndexError(f"softmax_xent: target {target} out of range for {n} logits")
    tape = logits.tape
    z = logits.data - logits.data.max()
    ez = np.exp(z)
    p = ez / ez.sum()
    loss = np.asarray(np.log(ez.sum()) - z[target])
    out = Value(loss, tape)

    def backward():
        g = out.grad
        d = p.copy()
        d[target] -= 1.0
        _accumulate(logits, g * d)

    tape.record((out,), backward)
    return out


def lstm_cell(x, h_prev, c_prev, w, u, b):
    """One step of a standard LSTM cell, fused forward and backward.

    Gate pre-activations are ``w @ x + u @ h_prev + b`` packed in
    [input, forget, candidate, output] order; the candidate uses tanh,
    the three gates use sigmoid:

        c = f * c_prev + i * g
        h = o * tanh(c)

    Returns the pair (h, c).
    """
    hidden = h_prev.data.shape[0] if h_prev.data.ndim == 1 else -1
    ok = (
        x.data.ndim == 1
        and h_prev.data.ndim == 1
        and c_prev.data.shape == h_prev.data.shape
        and w.data.shape == (4 * hidden, x.data.shape[0])
        and u.data.shape == (4 * hidden, hidden)
        and b.data.shape == (4 * hidden,)
    )
    if not ok:
        raise ShapeError(
            "lstm_cell: x%s h%s c%s w%s u%s b%s"
            % (x.data.shape, h_prev.data.shape, c_prev.data.shape,
               w.data.shape, u.data.shape, b.data.shape)
        )
    tape = _tape_of(x, h_prev, c_prev, w, u, b)

    z = w.data @ x.data + u.data @ h_prev.data + b.data
    i = 1.0 / (1.0 + np.exp(-z[:hidden]))
    f = 1.0 / (1.0 + np.exp(-z[hidden:2 * hidden]))
    g = np.tanh(z[2 * hidden:3 * hidden])
    o = 1.0 / (1.0 + np.exp(-z[3 * hidden:]))
    c_new = f * c_prev.data + i * g
    tc = np.tanh(c_new)
    h_new = o * tc

    h_out = Value(h_new, tape)
    c_out = Value(c_new, tape)

    def backward():
        dh = h_out.grad if h_out.grad is not None else 0.0
        dc_up = c_out.grad if c_out.grad is not None else 0.0
        do = dh * tc
        dc = dc_up + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev.data
        dg = dc * i
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ])
        _accumulate(w, np.outer(dz, x.data))
        _accumulate(u, np.outer(dz, h_prev.data))
        _accumulate(b, dz)
        _accumulate(x, w.data.T @ dz)
        _accumulate(h_prev, u.data.T @ dz)
        _accumulate(c_prev, dc * f)

    tape.record((h_out, c_out), backward)
    return h_out, c_out
