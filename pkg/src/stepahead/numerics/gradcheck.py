"""Finite-difference verification of tape gradients.

The checker is the independent oracle for every differentiable op: it
never reads the tape's backward results except to compare them against
central differences computed from fresh forward passes.
"""

import numpy as np

from .tape import Tape


def _relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def grad_check(f, point, eps=1e-4):
    """Max relative error between tape and central-difference gradients.

    ``f`` maps a single Value to a scalar Value; ``point`` is the ndarray
    at which to differentiate. Every coordinate is perturbed by +/- eps.
    """
    point = np.asarray(point, dtype=np.float64)
    tape = Tape()
    x = tape.value(point.copy())
    y = f(x)
    tape.backward(y)
    analytic = x.grad if x.grad is not None else np.zeros_like(point)

    worst = 0.0
    flat = point.reshape(-1)
    aflat = analytic.reshape(-1)
    for k in range(flat.size):
        saved = flat[k]
        flat[k] = saved + eps
        hi = float(f(Tape().value(point.copy())).data)
        flat[k] = saved - eps
        lo = float(f(Tape().value(point.copy())).data)
        flat[k] = saved
        numeric = (hi - lo) / (2.0 * eps)
        worst = max(worst, _relative_error(float(aflat[k]), numeric))
    return worst


def grad_check_named(f, arrays, eps=1e-4):
    """grad_check over a dict of named arrays, e.g. a whole parameter set.

    ``f`` maps ``dict[str, Value]`` to a scalar Value. Returns the max
    relative error over every coordinate of every array.
    """
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in arrays.items()}

    def run(active):
        tape = Tape()
        values = {k: tape.value(v.copy()) for k, v in active.items()}
        return tape, values, f(values)

    tape, values, y = run(arrays)
    tape.backward(y)

    worst = 0.0
    for name, arr in arrays.items():
        grad = values[name].grad
        analytic = grad if grad is not None else np.zeros_like(arr)
        flat = arr.reshape(-1)
        aflat = analytic.reshape(-1)
        for k in range(flat.size):
            saved = flat[k]
            flat[k] = saved + eps
            hi = float(run(arrays)[2].data)
            flat[k] = saved - eps
            lo = float(run(arrays)[2].data)
            flat[k] = saved
            numeric = (hi - lo) / (2.0 * eps)
            worst = max(worst, _relative_error(float(aflat[k]), numeric))
    return worst
