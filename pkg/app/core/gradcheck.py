"""Analytic gradients versus central finite differences.

Errors are norm-wise per parameter, ||analytic - numeric|| divided by the
larger of the two norms (clamped at 1e-8), and the worst parameter sets
its group's error.
"""
import logging
from dataclasses import dataclass

import numpy as np

from core import autograd as ag

logger = logging.getLogger(__name__)

STEP = 1e-5
TOLERANCE = 1e-4
DENOMINATOR_FLOOR = 1e-8


@dataclass(frozen=True)
class GroupCheck:
    group: str
    max_error: float = None
    params: int = 0
    tolerance: float = TOLERANCE

    @property
    def skipped(self):
        return self.max_error is None

    @property
    def passed(self):
        return self.skipped or self.max_error < self.tolerance


def relative_error(analytic, numeric):
    """Norm-wise relative error ||a - n|| / max(||a||, ||n||, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric),
                DENOMINATOR_FLOOR)
    return float(np.linalg.norm(analytic - numeric) / scale)


def analytic_gradients(params, loss_fn):
    """Gradient of `loss_fn()` for every param; zeros where none flowed."""
    for param in params:
        param.zero_grad()
    loss_fn().backward()
    grads = {}
    for param in params:
        grads[param.name] = np.zeros_like(param.data) if param.grad is None \
            else param.grad.copy()
        param.zero_grad()
    return grads


def numeric_gradient(param, loss_fn, step=STEP):
    """Central differences, one entry of `param` at a time."""
    grad = np.zeros_like(param.data)
    flat, flat_grad = param.data.reshape(-1), grad.reshape(-1)
    with ag.no_grad():
        for index in range(flat.size):
            original = flat[index]
            flat[index] = original + step
            upper = loss_fn().item()
            flat[index] = original - step
            lower = loss_fn().item()
            flat[index] = original
            flat_grad[index] = (upper - lower) / (2.0 * step)
    return grad


def check_gradients(store, loss_fn, step=STEP, tolerance=TOLERANCE):
    """One GroupCheck per param group; frozen groups are skipped."""
    trainable = store.trainable()
    analytic = analytic_gradients(trainable, loss_fn)
    checks = []
    for group in store.groups():
        params = [p for p in store.group(group) if not p.frozen]
        if not params:
            checks.append(GroupCheck(group, tolerance=tolerance))
            continue
        worst = 0.0
        for param in params:
            error = relative_error(analytic[param.name],
                                   numeric_gradient(param, loss_fn, step))
            logger.debug('%s: relative error %.3e', param.name, error)
            worst = max(worst, error)
        checks.append(GroupCheck(group, worst, len(params), tolerance))
    return checks
