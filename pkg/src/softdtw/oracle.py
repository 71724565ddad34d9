"""Exhaustive reference computations for testing the dynamic programs.

Everything here enumerates alignments explicitly or runs the quartic
forward recursion for the average alignment matrix, so costs grow
exponentially (or as ``(nm)^2``). Use only on small inputs.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .core import as_series, check_gamma

MAX_ALIGNMENTS = 10**6
MAX_QUARTIC_CELLS = 400

# step order fixes the enumeration order: diagonal, down, right
_STEPS = ((1, 1), (1, 0), (0, 1))


@lru_cache(maxsize=None)
def delannoy(a: int, b: int) -> int:
    """Delannoy number ``D(a, b)``; the number of ``(a+1) x (b+1)`` alignments."""
    if a < 0 or b < 0:
        raise ValueError("delannoy arguments must be nonnegative")
    if a == 0 or b == 0:
        return 1
    return delannoy(a - 1, b) + delannoy(a, b - 1) + delannoy(a - 1, b - 1)


def _guard(n: int, m: int) -> int:
    if n < 1 or m < 1:
        raise ValueError(f"lengths must be positive, got ({n}, {m})")
    count = delannoy(n - 1, m - 1)
    if count > MAX_ALIGNMENTS:
        raise ValueError(
            f"refusing to enumerate {count} alignments for ({n}, {m}); limit is {MAX_ALIGNMENTS}"
        )
    return count


def enumerate_paths(n: int, m: int) -> list[list[tuple[int, int]]]:
    """All monotone paths from ``(0, 0)`` to ``(n-1, m-1)``, in step-lexicographic order."""
    _guard(n, m)
    out: list[list[tuple[int, int]]] = []

    def walk(path):
        i, j = path[-1]
        if (i, j) == (n - 1, m - 1):
            out.append(list(path))
            return
        for di, dj in _STEPS:
            if i + di < n and j + dj < m:
                path.append((i + di, j + dj))
                walk(path)
                path.pop()

    walk([(0, 0)])
    return out


def enumerate_alignments(n: int, m: int) -> list[np.ndarray]:
    """Every binary ``(n, m)`` alignment matrix exactly once."""
    mats = []
    for path in enumerate_paths(n, m):
        a = np.zeros((n, m), dtype=np.int8)
        for i, j in path:
            a[i, j] = 1
        mats.append(a)
    return mats


def _costs(x, y):
    x = as_series(x, "x")
    y = as_series(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ValueError("feature dimension mismatch")
    # independent of core.cost_matrix on purpose
    n, m = x.shape[1], y.shape[1]
    delta = np.array([[np.sum((x[:, i] - y[:, j]) ** 2) for j in range(m)] for i in range(n)])
    mats = enumerate_alignments(n, m)
    scores = np.array([float(np.sum(a * delta)) for a in mats])
    return delta, mats, scores


def brute_force_sdtw(x, y, gamma: float) -> float:
    """Soft-minimum of all alignment scores, by enumeration."""
    gamma = check_gamma(gamma)
    _, _, scores = _costs(x, y)
    if gamma == 0.0:
        return float(scores.min())
    return float(-gamma * logsumexp(-scores / gamma))


def brute_force_expected_alignment(x, y, gamma: float) -> np.ndarray:
    """Gibbs-weighted average of all alignment matrices."""
    gamma = check_gamma(gamma)
    if gamma <= 0.0:
        raise ValueError("gamma must be > 0")
    _, mats, scores = _costs(x, y)
    z = -scores / gamma
    w = np.exp(z - z.max())
    w /= w.sum()
    return np.tensordot(w, np.stack(mats).astype(np.float64), axes=1)


def average_alignment_forward(x, y, gamma: float) -> np.ndarray:
    """Average alignment matrix by the quartic forward recursion.

    ``F[i][j]`` accumulates ``sum_A exp(-<A, delta>/gamma) A`` over partial
    alignments ending at ``(i, j)``: the three predecessor blocks are padded
    to ``(i+1) x (j+1)``, summed, scaled by ``exp(-delta_ij/gamma)``, and the
    corner gets the partial partition function ``k_ij``. Each block is
    stored divided by its own ``k`` so the recursion stays in range; the
    final block, normalized by ``k_nm``, is the answer.
    """
    x = as_series(x, "x")
    y = as_series(y, "y")
    gamma = check_gamma(gamma)
    if gamma <= 0.0:
        raise ValueError("gamma must be > 0")
    if x.shape[0] != y.shape[0]:
        raise ValueError("feature dimension mismatch")
    n, m = x.shape[1], y.shape[1]
    if n * m > MAX_QUARTIC_CELLS:
        raise ValueError(f"n*m = {n * m} exceeds {MAX_QUARTIC_CELLS}")

    # log k_ij, built by its own log-sum-exp recursion
    logk = np.full((n + 1, m + 1), -np.inf)
    logk[0, 0] = 0.0
    blocks: dict[tuple[int, int], np.ndarray] = {(0, 0): np.zeros((0, 0))}
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            delta = np.sum((x[:, i - 1] - y[:, j - 1]) ** 2)
            preds = [(i - 1, j - 1), (i - 1, j), (i, j - 1)]
            logs = np.array([logk[q] for q in preds])
            total = logsumexp(logs)
            logk[i, j] = total - delta / gamma
            block = np.zeros((i, j))
            for q, lq in zip(preds, logs):
                if lq == -np.inf:
                    continue
                prev = blocks[q]
                block[: prev.shape[0], : prev.shape[1]] += np.exp(lq - total) * prev
            block[i - 1, j - 1] = 1.0
            blocks[(i, j)] = block
        # row i - 1 is no longer needed
        for j in range(m + 1):
            blocks.pop((i - 1, j), None)
    return blocks[(n, m)]
