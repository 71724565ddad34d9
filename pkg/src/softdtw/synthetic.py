"""Synthetic time-series families used by the demos and the test suite."""

from __future__ import annotations

import numpy as np


def bump(length: int, center: float, width: float, height: float = 1.0) -> np.ndarray:
    t = np.arange(length, dtype=np.float64)
    return height * np.exp(-0.5 * ((t - center) / width) ** 2)


def bump_family(
    rng: np.random.Generator,
    n_series: int = 10,
    length: int = 40,
    max_shift: float = 6.0,
    noise: float = 0.05,
    n_bumps: int = 2,
) -> list[np.ndarray]:
    """Series sharing one bump pattern, each randomly shifted in time plus noise.

    Returns a list of ``(1, length)`` arrays.
    """
    centers = np.sort(rng.uniform(0.25 * length, 0.75 * length, size=n_bumps))
    widths = rng.uniform(0.03 * length, 0.08 * length, size=n_bumps)
    heights = rng.uniform(0.8, 2.0, size=n_bumps) * rng.choice([-1.0, 1.0], size=n_bumps)
    out = []
    for _ in range(n_series):
        shift = rng.uniform(-max_shift, max_shift)
        x = sum(bump(length, c + shift, w, h) for c, w, h in zip(centers, widths, heights))
        out.append((x + noise * rng.standard_normal(length))[np.newaxis, :])
    return out


def planted_clusters(
    rng: np.random.Generator,
    n_clusters: int = 3,
    per_cluster: int = 15,
    length: int = 30,
    max_shift: float = 3.0,
    noise: float = 0.05,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Shifted and time-warped copies of ``n_clusters`` distinct prototypes.

    Prototypes are a bump, a dip and a step (cycled for larger ``k``) so the
    clusters differ in shape, not just position.
    """
    t = np.linspace(0.0, 1.0, length)
    series, labels = [], []
    for c in range(n_clusters):
        kind = c % 3
        for _ in range(per_cluster):
            shift = rng.uniform(-max_shift, max_shift) / length
            warp = rng.uniform(0.85, 1.15)
            u = np.clip((t - 0.5 - shift) * warp + 0.5, 0.0, 1.0)
            if kind == 0:
                x = 2.0 * np.exp(-0.5 * ((u - 0.5) / 0.08) ** 2)
            elif kind == 1:
                x = -2.0 * np.exp(-0.5 * ((u - 0.5) / 0.08) ** 2)
            else:
                x = 2.0 / (1.0 + np.exp(-(u - 0.5) / 0.03)) - 1.0
            x = x + 0.5 * (c // 3)
            series.append((x + noise * rng.standard_normal(length))[np.newaxis, :])
            labels.append(c)
    return series, np.array(labels)


def spike_task(
    rng: np.random.Generator,
    n_series: int = 100,
    length: int = 30,
    fraction: float = 0.6,
    jitter: int = 2,
    noise: float = 0.02,
) -> np.ndarray:
    """Series whose tail holds a sharp spike at a jittered position.

    The spike position in the tail is tied to a feature of the head (the
    phase of a slow oscillation) up to ``jitter`` steps of unpredictable
    offset. Returns an array of shape ``(n_series, 1, length)``.
    """
    t = np.arange(length)
    start = int(np.floor(fraction * length))
    tail = length - start
    out = np.empty((n_series, 1, length))
    for k in range(n_series):
        base = int(rng.integers(jitter, tail - jitter - 1))
        pos = start + base + int(rng.integers(-jitter, jitter + 1))
        head_signal = np.sin(2 * np.pi * (t / start) + base * 0.5) * (t < start)
        x = 0.5 * head_signal
        x[pos] += 3.0
        out[k, 0] = x + noise * rng.standard_normal(length)
    return out
