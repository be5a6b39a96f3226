"""Self-contained maximizer: BFGS ascent with Armijo backtracking.

Deterministic and dependency-free; objectives may return -inf to mark
infeasible points, which the line search simply backs away from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["OptResult", "maximize"]

_ARMIJO_C1 = 1e-4
_MAX_HALVINGS = 40


@dataclass(frozen=True, eq=False)
class OptResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    converged: bool
    iterations: int


def maximize(value_and_grad, x0, gtol: float = 1e-6, max_iter: int = 500) -> OptResult:
    """Maximize a smooth objective given a (value, gradient) callable.

    Convergence is declared when the gradient max-norm drops below ``gtol``.
    The inverse-Hessian estimate is reset to the identity whenever the BFGS
    direction stops being an ascent direction.
    """
    x = np.asarray(x0, dtype=float).copy()
    d = x.size
    f, g = value_and_grad(x)
    if not math.isfinite(f):
        raise ValueError("objective must be finite at the starting point")
    h_inv = np.eye(d)
    iterations = 0
    converged = bool(np.max(np.abs(g)) < gtol)
    while not converged and iterations < max_iter:
        iterations += 1
        direction = h_inv @ g
        slope = float(g @ direction)
        if not math.isfinite(slope) or slope <= 0:
            h_inv = np.eye(d)
            direction = g.copy()
            slope = float(g @ g)
            if slope == 0:
                break
        step = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS):
            x_new = x + step * direction
            f_new, g_new = value_and_grad(x_new)
            if math.isfinite(f_new) and f_new >= f + _ARMIJO_C1 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        # Skip the curvature update when s'y is numerically unsafe.
        if sy < -1e-10 * np.linalg.norm(s) * np.linalg.norm(y) or sy == 0:
            h_inv = np.eye(d)
        elif sy > 1e-12:
            rho = 1.0 / sy
            i_mat = np.eye(d)
            left = i_mat - rho * np.outer(s, y)
            h_inv = left @ h_inv @ left.T + rho * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
        converged = bool(np.max(np.abs(g)) < gtol)
    return OptResult(x=x, value=f, grad=g, converged=converged, iterations=iterations)
