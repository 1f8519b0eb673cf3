"""Central finite-difference oracle for the analytic gradients.

Only meaningful in float64 mode; float32 rounding drowns the h^2 truncation
term at usable step sizes.
"""

from __future__ import annotations

import numpy as np

from .core import NumericError, Tensor


def grad_check(fn, params, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``fn`` is a nullary callable returning a scalar Tensor built from the
    ``params`` leaves. Returns max over all parameter entries of
    |analytic - fd| / max(1, |fd|).
    """
    params = list(params)
    for p in params:
        if p.data.dtype != np.float64:
            raise ValueError(f"grad_check requires float64 params, got {p.data.dtype}")
        p.grad = None

    out = fn()
    if not isinstance(out, Tensor) or out.data.size != 1:
        raise ValueError("grad_check: function under test must return a scalar Tensor")
    if not np.isfinite(out.data).all():
        raise NumericError("grad_check: non-finite loss")
    out.backward()

    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        ana_flat = ana.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(fn().data)
            flat[i] = orig - eps
            f_minus = float(fn().data)
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * eps)
            rel = abs(ana_flat[i] - fd) / max(1.0, abs(fd))
            if rel > worst:
                worst = rel
    return worst
