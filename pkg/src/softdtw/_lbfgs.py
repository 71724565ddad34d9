"""Limited-memory BFGS with Armijo backtracking.

Small and self-contained so the barycenter solver can return the best
iterate and a trace of accepted objective values.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ARMIJO_C = 1e-4
MAX_HALVINGS = 50


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    trace: list[float] = field(default_factory=list)
    n_iter: int = 0
    message: str = ""


def _two_loop(g, memory):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(memory):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if memory:
        s, y, _ = memory[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(memory, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def minimize_lbfgs(
    fun_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    max_iterations: int = 100,
    gradient_tolerance: float = 1e-6,
    relative_tolerance: float = 1e-9,
    history_size: int = 10,
) -> LbfgsResult:
    """Minimize a smooth function given its value and gradient.

    Every accepted step satisfies the Armijo condition, so ``trace`` is
    non-increasing and its last entry is the value at the returned ``x``.
    """
    x = np.array(x0, dtype=np.float64).ravel()
    f, g = fun_and_grad(x)
    if not np.isfinite(f):
        raise ValueError(f"objective is not finite at the initial point ({f})")
    trace = [float(f)]
    memory: deque = deque(maxlen=history_size)
    message = "max_iterations reached"
    n_iter = 0
    while n_iter < max_iterations:
        if np.max(np.abs(g)) < gradient_tolerance:
            message = "gradient tolerance reached"
            break
        d = _two_loop(g, memory)
        slope = g @ d
        if not slope < 0:
            memory.clear()
            d = -g
            slope = g @ d
        t = 1.0 if memory else 1.0 / max(1.0, np.linalg.norm(g))
        accepted = False
        for _ in range(MAX_HALVINGS):
            x_new = x + t * d
            f_new, g_new = fun_and_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + ARMIJO_C * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if memory:
                memory.clear()
                continue
            message = "line search failed"
            break
        s = x_new - x
        y = g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            memory.append((s, y, 1.0 / sy))
        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        trace.append(float(f))
        n_iter += 1
        if decrease <= relative_tolerance * max(abs(f), 1.0):
            message = "relative decrease below tolerance"
            break
    return LbfgsResult(x=x, fun=float(f), trace=trace, n_iter=n_iter, message=message)
