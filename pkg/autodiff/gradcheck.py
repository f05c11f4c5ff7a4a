"""
Central finite-difference verification of analytic gradients.
"""

from typing import Callable

import numpy as np

from autodiff.tensor import Tensor, no_grad


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """
    Compare backward() against central differences.

    Args:
        f: Scalar-valued function of one tensor
        x: Point of evaluation; its values are restored before returning
        h: Finite-difference step

    Returns:
        max over coordinates of |analytic - numeric| / max(1, |analytic|)
    """
    leaf = Tensor(x.data, requires_grad=True)
    f(leaf).backward()
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)

    base = x.data.copy()
    numeric = np.zeros_like(base)
    work = base.copy()
    with no_grad():
        for index in np.ndindex(base.shape):
            work[index] = base[index] + h
            upper = f(Tensor(work)).item()
            work[index] = base[index] - h
            lower = f(Tensor(work)).item()
            work[index] = base[index]
            numeric[index] = (upper - lower) / (2.0 * h)

    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic)))) if base.size else 0.0


def grad_check_parameter(loss_fn: Callable[[], Tensor], param: Tensor, h: float = 1e-5) -> float:
    """
    grad_check for a tensor captured inside `loss_fn` (e.g. a layer weight).

    The parameter is perturbed in place and restored; its `.grad` is
    overwritten with the analytic gradient.
    """
    param.grad = None
    loss_fn().backward()
    analytic = param.grad if param.grad is not None else np.zeros_like(param.data)

    base = param.data.copy()
    numeric = np.zeros_like(base)
    try:
        with no_grad():
            for index in np.ndindex(base.shape):
                param.data[index] = base[index] + h
                upper = loss_fn().item()
                param.data[index] = base[index] - h
                lower = loss_fn().item()
                param.data[index] = base[index]
                numeric[index] = (upper - lower) / (2.0 * h)
    finally:
        param.data = base
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))))
