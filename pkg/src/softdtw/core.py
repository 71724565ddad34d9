"""Soft-DTW values and gradients.

Time series are ``(p, n)`` float arrays: ``p`` features (rows) by ``n`` time
steps (columns). One-dimensional inputs are read as univariate series.

The forward pass fills the intermediate-cost table ``R`` with a smoothed
Bellman recursion; the backward pass sweeps ``R`` in reverse to recover the
expected alignment matrix ``E``, which is the gradient of the value with
respect to the cost matrix. The gradient with respect to ``x`` then follows
from the transpose Jacobian of the squared Euclidean cost.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit

# exp() underflows to 0 in double precision below this argument
_EXP_FLOOR = -745.0


def as_series(x, name: str = "x") -> np.ndarray:
    """Return ``x`` as a finite ``(p, n)`` float64 array.

    A 1-D input of length ``n`` becomes a ``(1, n)`` array.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have p >= 1 and n >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not (gamma >= 0.0 and math.isfinite(gamma)):
        raise ValueError(f"gamma must be a finite number >= 0, got {gamma}")
    return gamma


# ---------------------------------------------------------------------------
# Elementary operations
# ---------------------------------------------------------------------------


def soft_min(values: Iterable[float], gamma: float) -> float:
    """Generalized minimum with smoothing ``gamma``.

    Returns the exact minimum for ``gamma == 0`` and
    ``-gamma * log(sum(exp(-a / gamma)))`` otherwise, evaluated with a
    min-shift so that no exponent is positive. ``+inf`` entries contribute
    nothing; if every entry is ``+inf`` the result is ``+inf``.
    """
    gamma = check_gamma(gamma)
    vals = np.asarray(list(values), dtype=np.float64)
    if vals.size == 0:
        raise ValueError("soft_min of an empty sequence")
    if np.any(np.isnan(vals)) or np.any(vals == -np.inf):
        raise ValueError("soft_min entries must be finite or +inf")
    lo = vals.min()
    if gamma == 0.0 or np.isinf(lo):
        return float(lo)
    return float(lo - gamma * np.log(np.sum(np.exp(-(vals - lo) / gamma))))


def squared_euclidean_cost(a, b) -> float:
    """Squared Euclidean distance between two feature vectors."""
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(d @ d)


def cost_matrix(x, y) -> np.ndarray:
    """Pairwise squared Euclidean costs ``delta[i, j] = |x_i - y_j|^2``.

    Returns an ``(n, m)`` array for ``x`` of shape ``(p, n)`` and ``y`` of
    shape ``(p, m)``.
    """
    x = as_series(x, "x")
    y = as_series(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"feature dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    # direct differences keep delta[i, j] exactly 0 when x_i == y_j
    diff = x[:, :, np.newaxis] - y[:, np.newaxis, :]
    return np.einsum("pij,pij->ij", diff, diff)


def jacobian_apply(x, y, b) -> np.ndarray:
    """Apply the transposed Jacobian of ``cost_matrix`` w.r.t. ``x`` to ``b``.

    For the squared Euclidean cost this is
    ``2 * (x * b.sum(axis=1) - y @ b.T)``, a ``(p, n)`` array.
    """
    x = as_series(x, "x")
    y = as_series(y, "y")
    b = np.asarray(b, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"feature dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if b.shape != (x.shape[1], y.shape[1]):
        raise ValueError(f"b must have shape {(x.shape[1], y.shape[1])}, got {b.shape}")
    return 2.0 * (x * b.sum(axis=1)[np.newaxis, :] - y @ b.T)


# ---------------------------------------------------------------------------
# Compiled recursions
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _softmin3(a, b, c, gamma):
    lo = min(a, min(b, c))
    if gamma == 0.0 or lo == np.inf:
        return lo
    s = math.exp((lo - a) / gamma) + math.exp((lo - b) / gamma) + math.exp((lo - c) / gamma)
    return lo - gamma * math.log(s)


@njit(cache=True, nogil=True)
def _forward_table(delta, gamma):
    n, m = delta.shape
    r = np.full((n + 1, m + 1), np.inf)
    r[0, 0] = 0.0
    # row-major sweep: each cell needs only its upper, left and upper-left neighbours
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            r[i, j] = delta[i - 1, j - 1] + _softmin3(
                r[i - 1, j - 1], r[i - 1, j], r[i, j - 1], gamma
            )
    return r


@njit(cache=True, nogil=True)
def _forward_value(x, y, gamma):
    # x: (n, p), y: (m, p); two rows of storage, costs computed on the fly
    n = x.shape[0]
    m = y.shape[0]
    p = x.shape[1]
    prev = np.full(n + 1, np.inf)
    cur = np.full(n + 1, np.inf)
    prev[0] = 0.0
    for j in range(1, m + 1):
        cur[0] = np.inf
        for i in range(1, n + 1):
            d = 0.0
            for k in range(p):
                t = x[i - 1, k] - y[j - 1, k]
                d += t * t
            cur[i] = d + _softmin3(prev[i - 1], prev[i], cur[i - 1], gamma)
        prev, cur = cur, prev
    return prev[n]


@njit(cache=True, nogil=True)
def _clamped_exp(z):
    if z < _EXP_FLOOR:
        return 0.0
    return math.exp(z)


@njit(cache=True, nogil=True)
def _backward_table(delta, r, gamma):
    n, m = delta.shape
    d = np.zeros((n + 2, m + 2))
    d[1 : n + 1, 1 : m + 1] = delta
    rr = np.full((n + 2, m + 2), -np.inf)
    rr[1 : n + 1, 1 : m + 1] = r[1 : n + 1, 1 : m + 1]
    rr[n + 1, m + 1] = r[n, m]
    e = np.zeros((n + 2, m + 2))
    e[n + 1, m + 1] = 1.0
    for i in range(n, 0, -1):
        for j in range(m, 0, -1):
            a = _clamped_exp((rr[i + 1, j] - rr[i, j] - d[i + 1, j]) / gamma)
            b = _clamped_exp((rr[i, j + 1] - rr[i, j] - d[i, j + 1]) / gamma)
            c = _clamped_exp((rr[i + 1, j + 1] - rr[i, j] - d[i + 1, j + 1]) / gamma)
            e[i, j] = e[i + 1, j] * a + e[i, j + 1] * b + e[i + 1, j + 1] * c
    return e[1 : n + 1, 1 : m + 1].copy()


# ---------------------------------------------------------------------------
# Forward / backward passes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForwardTable:
    """Intermediate alignment costs from the forward recursion.

    ``r`` has shape ``(n + 1, m + 1)``; row and column 0 hold the border
    (``r[0, 0] = 0``, ``+inf`` elsewhere). ``value`` is ``r[n, m]``.
    """

    r: np.ndarray
    gamma: float

    @property
    def value(self) -> float:
        return float(self.r[-1, -1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.r.shape[0] - 1, self.r.shape[1] - 1


def sdtw_forward(x, y, gamma: float) -> ForwardTable:
    """Run the forward recursion and keep the full table for backprop."""
    gamma = check_gamma(gamma)
    delta = cost_matrix(x, y)
    return ForwardTable(r=_forward_table(delta, gamma), gamma=gamma)


def forward_from_cost(delta, gamma: float) -> ForwardTable:
    """Forward recursion on a precomputed ``(n, m)`` cost matrix."""
    gamma = check_gamma(gamma)
    delta = np.ascontiguousarray(delta, dtype=np.float64)
    if delta.ndim != 2 or 0 in delta.shape:
        raise ValueError(f"cost matrix must be a nonempty 2-D array, got {delta.shape}")
    return ForwardTable(r=_forward_table(delta, gamma), gamma=gamma)


def sdtw_backward(table: ForwardTable, delta, gamma: float | None = None) -> np.ndarray:
    """Expected alignment matrix ``E`` by the reverse sweep over ``table``.

    Args:
        table: output of :func:`sdtw_forward` on the same pair.
        delta: the ``(n, m)`` cost matrix used to build ``table``.
        gamma: smoothing; defaults to ``table.gamma`` and must be positive.

    Returns:
        ``(n, m)`` array with ``E[0, 0] == E[-1, -1] == 1``.
    """
    gamma = table.gamma if gamma is None else check_gamma(gamma)
    if gamma <= 0.0:
        raise ValueError("sdtw_backward needs gamma > 0; use optimal_path_backtrack for gamma = 0")
    delta = np.ascontiguousarray(delta, dtype=np.float64)
    if delta.shape != table.shape:
        raise ValueError(f"cost matrix shape {delta.shape} does not match table {table.shape}")
    return _backward_table(delta, table.r, gamma)


def optimal_path_backtrack(table: ForwardTable, delta=None) -> list[tuple[int, int]]:
    """Recover an optimal alignment from a ``gamma = 0`` forward table.

    Indices are 0-based: the path runs from ``(0, 0)`` to ``(n - 1, m - 1)``.
    Ties prefer the diagonal predecessor, then ``(i - 1, j)``, then
    ``(i, j - 1)``.
    """
    if table.gamma != 0.0:
        raise ValueError("optimal_path_backtrack needs a table computed with gamma = 0")
    r = table.r
    i, j = table.shape
    path = [(i - 1, j - 1)]
    while (i, j) != (1, 1):
        candidates = ((i - 1, j - 1), (i - 1, j), (i, j - 1))
        best = min(range(3), key=lambda k: (r[candidates[k]], k))
        i, j = candidates[best]
        path.append((i - 1, j - 1))
    path.reverse()
    return path


def path_cost(path: Sequence[tuple[int, int]], delta) -> float:
    """Sum of ``delta`` along ``path``, accumulated in forward order."""
    total = 0.0
    for i, j in path:
        total = delta[i, j] + total
    return float(total)


def path_matrix(path: Sequence[tuple[int, int]], shape: tuple[int, int]) -> np.ndarray:
    """Binary alignment matrix with ones on ``path``."""
    a = np.zeros(shape)
    rows, cols = zip(*path)
    a[list(rows), list(cols)] = 1.0
    return a


def alignment_matrix(x, y, gamma: float) -> np.ndarray:
    """Gradient of the value w.r.t. the cost matrix.

    For ``gamma > 0`` this is the expected alignment; for ``gamma = 0`` it is
    the (tie-broken) optimal alignment as a 0/1 matrix.
    """
    gamma = check_gamma(gamma)
    delta = cost_matrix(x, y)
    table = forward_from_cost(delta, gamma)
    if gamma == 0.0:
        return path_matrix(optimal_path_backtrack(table), delta.shape)
    return sdtw_backward(table, delta)


def sdtw_value_and_grad(x, y, gamma: float) -> tuple[float, np.ndarray]:
    """Soft-DTW value and its gradient w.r.t. ``x``.

    At ``gamma = 0`` the gradient is the subgradient given by the tie-broken
    optimal path.
    """
    x = as_series(x, "x")
    y = as_series(y, "y")
    gamma = check_gamma(gamma)
    delta = cost_matrix(x, y)
    table = forward_from_cost(delta, gamma)
    if gamma == 0.0:
        e = path_matrix(optimal_path_backtrack(table), delta.shape)
    else:
        e = sdtw_backward(table, delta)
    return table.value, jacobian_apply(x, y, e)


def sdtw(x, y, gamma: float = 1.0) -> float:
    """Soft-DTW value using linear-memory storage (no table is kept)."""
    x = as_series(x, "x")
    y = as_series(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"feature dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    gamma = check_gamma(gamma)
    return float(_forward_value(np.ascontiguousarray(x.T), np.ascontiguousarray(y.T), gamma))


def dtw(x, y) -> float:
    """Classical DTW value (squared Euclidean ground cost)."""
    return sdtw(x, y, 0.0)


def sdtw_batch(pairs: Sequence[tuple], gamma: float, n_jobs: int | None = None) -> np.ndarray:
    """Values for many ``(x, y)`` pairs, in input order.

    With ``n_jobs > 1`` pairs are spread over a thread pool; the compiled
    kernel releases the GIL, and results match sequential evaluation.
    """
    gamma = check_gamma(gamma)
    if not n_jobs or n_jobs <= 1:
        return np.array([sdtw(x, y, gamma) for x, y in pairs], dtype=np.float64)
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return np.fromiter(
            pool.map(lambda xy: sdtw(xy[0], xy[1], gamma), pairs), dtype=np.float64, count=len(pairs)
        )
