"""Named parameter set with Adam state, plus global-norm gradient clipping."""

import numpy as np


class ParamSet:
    """name -> tensor map carrying per-parameter Adam moments.

    Moment buffers share shapes with their parameters; ``step_count``
    increases by one per ``adam_step`` call.
    """

    def __init__(self):
        self.tensors = {}
        self.m = {}
        self.v = {}
        self.step_count = 0

    def add(self, name, array):
        if name in self.tensors:
            raise ValueError(f"duplicate parameter {name!r}")
        arr = np.asarray(array, dtype=np.float64)
        self.tensors[name] = arr
        self.m[name] = np.zeros_like(arr)
        self.v[name] = np.zeros_like(arr)
        return arr

    def __getitem__(self, name):
        return self.tensors[name]

    def __contains__(self, name):
        return name in self.tensors

    def names(self):
        return list(self.tensors)

    def items(self):
        return self.tensors.items()

    def copy_values(self):
        """Snapshot of parameter values only (no optimizer state)."""
        return {k: v.copy() for k, v in self.tensors.items()}


def clip_gradients(grads, clip_norm):
    """Scale all gradients in place so their global L2 norm is <= clip_norm.

    Returns the pre-clip norm. clip_norm <= 0 disables clipping.
    """
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if clip_norm > 0 and norm > clip_norm:
        factor = clip_norm / norm
        for g in grads.values():
            g *= factor
    return norm


def adam_step(params, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Standard Adam update with bias correction, applied in place.

    Only parameters named in ``grads`` are updated; the rest keep their
    exact values (used to freeze sub-networks). Raises on non-finite
    gradients, naming the offending parameter.
    """
    for name, g in grads.items():
        if name not in params.tensors:
            raise KeyError(f"adam_step: unknown parameter {name!r}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {name}")

    params.step_count += 1
    t = params.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, g in grads.items():
        m = params.m[name]
        v = params.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        params.tensors[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params
