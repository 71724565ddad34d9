"""Barycenters (Frechet means) of time series under soft-DTW.

The objective is ``sum_i (w_i / m_i) * sdtw_gamma(x, y_i)`` where ``m_i`` is
the length of ``y_i``. Three solvers are provided: L-BFGS on the smoothed
objective, DBA (alternating optimal alignment and pointwise averaging) and
a batch subgradient method. All of them return the best iterate found.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._lbfgs import minimize_lbfgs
from .core import (
    as_series,
    check_gamma,
    cost_matrix,
    forward_from_cost,
    jacobian_apply,
    optimal_path_backtrack,
    path_matrix,
    sdtw,
    sdtw_backward,
)


@dataclass
class BarycenterProblem:
    """A weighted family of series and the length of the barycenter.

    Weights are normalized to sum to one. ``target_length`` defaults to the
    median input length.
    """

    series: list
    weights: np.ndarray | None = None
    target_length: int | None = None

    def __post_init__(self):
        self.series = [as_series(y, f"series[{k}]") for k, y in enumerate(self.series)]
        if not self.series:
            raise ValueError("need at least one series")
        dims = {y.shape[0] for y in self.series}
        if len(dims) != 1:
            raise ValueError(f"series have different feature dimensions: {sorted(dims)}")
        if self.weights is None:
            w = np.ones(len(self.series))
        else:
            w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(self.series),) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be one finite nonnegative number per series")
        if w.sum() <= 0:
            raise ValueError("weights must not all be zero")
        self.weights = w / w.sum()
        if self.target_length is None:
            self.target_length = int(np.median(self.lengths))
        if self.target_length < 1:
            raise ValueError("target_length must be positive")

    @property
    def n_features(self) -> int:
        return self.series[0].shape[0]

    @property
    def lengths(self) -> np.ndarray:
        return np.array([y.shape[1] for y in self.series])

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_features, self.target_length


@dataclass
class OptimizerConfig:
    max_iterations: int = 100
    gradient_tolerance: float = 1e-6
    relative_tolerance: float = 1e-9
    history_size: int = 10
    seed: int = 0
    # subgradient only: initial step; None means 0.1 * mean series norm
    step_size: float | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be > 0")


@dataclass
class BarycenterResult:
    """Outcome of a barycenter solver.

    ``trace`` holds the objective of each accepted iterate and never
    increases; its last entry is the objective at ``barycenter``. ``history``
    holds every evaluated iterate's objective (only differs from ``trace``
    for the subgradient method).
    """

    barycenter: np.ndarray
    trace: list[float]
    history: list[float] = field(default_factory=list)
    diverged: bool = False

    def __iter__(self):
        yield self.barycenter
        yield self.trace


def _check_x(x, problem: BarycenterProblem) -> np.ndarray:
    x = as_series(x, "x")
    if x.shape != problem.shape:
        raise ValueError(f"barycenter must have shape {problem.shape}, got {x.shape}")
    return x


def _value_and_grad(x, problem: BarycenterProblem, gamma: float, with_grad: bool = True):
    value = 0.0
    grad = np.zeros_like(x)
    for w, y in zip(problem.weights, problem.series):
        if w == 0:
            continue
        scale = w / y.shape[1]
        delta = cost_matrix(x, y)
        table = forward_from_cost(delta, gamma)
        value += scale * table.value
        if with_grad:
            if gamma == 0.0:
                e = path_matrix(optimal_path_backtrack(table), delta.shape)
            else:
                e = sdtw_backward(table, delta)
            grad += scale * jacobian_apply(x, y, e)
    return value, grad


def barycenter_objective(x, problem: BarycenterProblem, gamma: float) -> float:
    """Weighted, length-normalized sum of soft-DTW values to the family."""
    x = _check_x(x, problem)
    gamma = check_gamma(gamma)
    total = 0.0
    for w, y in zip(problem.weights, problem.series):
        if w:
            total += w / y.shape[1] * sdtw(x, y, gamma)
    return total


def barycenter_gradient(x, problem: BarycenterProblem, gamma: float) -> np.ndarray:
    """Gradient of :func:`barycenter_objective`; a subgradient at ``gamma = 0``."""
    x = _check_x(x, problem)
    return _value_and_grad(x, problem, check_gamma(gamma))[1]


def dtw_loss(x, problem: BarycenterProblem) -> float:
    """The objective evaluated with plain DTW (``gamma = 0``)."""
    return barycenter_objective(x, problem, 0.0)


def soft_barycenter(
    problem: BarycenterProblem,
    gamma: float,
    init,
    config: OptimizerConfig | None = None,
) -> BarycenterResult:
    """Minimize the soft-DTW barycenter objective with L-BFGS."""
    config = config or OptimizerConfig()
    gamma = check_gamma(gamma)
    if gamma <= 0:
        raise ValueError("soft_barycenter needs gamma > 0")
    x0 = _check_x(init, problem)
    shape = x0.shape

    def fun_and_grad(flat):
        v, g = _value_and_grad(flat.reshape(shape), problem, gamma)
        return v, g.ravel()

    res = minimize_lbfgs(
        fun_and_grad,
        x0,
        max_iterations=config.max_iterations,
        gradient_tolerance=config.gradient_tolerance,
        relative_tolerance=config.relative_tolerance,
        history_size=config.history_size,
    )
    return BarycenterResult(barycenter=res.x.reshape(shape), trace=res.trace, history=list(res.trace))


def dba_barycenter(problem: BarycenterProblem, init, config: OptimizerConfig | None = None) -> BarycenterResult:
    """DTW Barycenter Averaging with weights ``w_i / m_i`` per aligned point."""
    config = config or OptimizerConfig()
    x = _check_x(init, problem).copy()
    f = dtw_loss(x, problem)
    trace = [f]
    for _ in range(config.max_iterations):
        num = np.zeros_like(x)
        den = np.zeros(x.shape[1])
        for w, y in zip(problem.weights, problem.series):
            if w == 0:
                continue
            delta = cost_matrix(x, y)
            a = path_matrix(optimal_path_backtrack(forward_from_cost(delta, 0.0)), delta.shape)
            scale = w / y.shape[1]
            num += scale * (y @ a.T)
            den += scale * a.sum(axis=1)
        assert np.all(den > 0), "a barycenter column was aligned to no point"
        x_new = num / den
        f_new = dtw_loss(x_new, problem)
        if not f_new < f:
            break
        decrease = f - f_new
        x, f = x_new, f_new
        trace.append(f)
        if decrease <= config.relative_tolerance * max(abs(f), 1.0):
            break
    return BarycenterResult(barycenter=x, trace=trace, history=list(trace))


def default_step_size(problem: BarycenterProblem) -> float:
    return 0.1 * float(np.mean([np.linalg.norm(y) for y in problem.series]))


def subgradient_barycenter(
    problem: BarycenterProblem, init, config: OptimizerConfig | None = None
) -> BarycenterResult:
    """Batch subgradient descent on the DTW objective, step ``eta0 / sqrt(t)``.

    Divergence (a non-finite or exploding objective) stops the run and sets
    ``diverged``; the best iterate seen is still returned.
    """
    config = config or OptimizerConfig()
    x = _check_x(init, problem).copy()
    eta0 = config.step_size if config.step_size is not None else default_step_size(problem)
    f, g = _value_and_grad(x, problem, 0.0)
    best_x, best_f = x, f
    trace, history = [f], [f]
    blowup = 1e12 * max(1.0, abs(f))
    diverged = False
    for t in range(1, config.max_iterations + 1):
        if np.max(np.abs(g)) < config.gradient_tolerance:
            break
        x = x - eta0 / np.sqrt(t) * g
        if not np.all(np.isfinite(x)):
            diverged = True
            break
        f, g = _value_and_grad(x, problem, 0.0)
        history.append(f)
        if not np.isfinite(f) or f > blowup:
            diverged = True
            break
        if f < best_f:
            best_x, best_f = x, f
            trace.append(f)
    return BarycenterResult(barycenter=best_x, trace=trace, history=history, diverged=diverged)


def resample(x, length: int) -> np.ndarray:
    """Linear interpolation of a ``(p, m)`` series onto ``length`` time steps."""
    x = as_series(x)
    m = x.shape[1]
    if length == m:
        return x.copy()
    if m == 1:
        return np.repeat(x, length, axis=1)
    src = np.linspace(0.0, 1.0, m)
    dst = np.linspace(0.0, 1.0, length)
    return np.vstack([np.interp(dst, src, row) for row in x])


def init_euclidean_mean(problem: BarycenterProblem) -> np.ndarray:
    """Weighted columnwise mean; all series must have the target length."""
    if np.any(problem.lengths != problem.target_length):
        raise ValueError("Euclidean mean initialization needs all series at the target length")
    return np.tensordot(problem.weights, np.stack(problem.series), axes=1)


def init_random(problem: BarycenterProblem, seed: int | np.random.Generator = 0) -> np.ndarray:
    """A uniformly chosen member of the family, resampled to the target length."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(len(problem.series)))
    return resample(problem.series[k], problem.target_length)


BARYCENTER_METHODS = ("soft", "dba", "subgradient")


def compute_barycenter(
    problem: BarycenterProblem,
    method: str = "soft",
    gamma: float = 1.0,
    init=None,
    config: OptimizerConfig | None = None,
) -> BarycenterResult:
    """Dispatch to one of the solvers; ``init`` defaults to a random member."""
    config = config or OptimizerConfig()
    if init is None:
        init = init_random(problem, config.seed)
    if method == "soft":
        return soft_barycenter(problem, gamma, init, config)
    if method == "dba":
        return dba_barycenter(problem, init, config)
    if method == "subgradient":
        return subgradient_barycenter(problem, init, config)
    raise ValueError(f"unknown barycenter method {method!r}; expected one of {BARYCENTER_METHODS}")
