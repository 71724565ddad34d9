"""k-means and nearest-centroid classification under soft-DTW."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.vq import kmeans2

from .barycenter import (
    BarycenterProblem,
    OptimizerConfig,
    compute_barycenter,
    init_euclidean_mean,
    init_random,
    resample,
)
from .core import as_series, check_gamma, sdtw


@dataclass
class ClusteringResult:
    centroids: list[np.ndarray]
    assignments: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    n_iter: int = 0


@dataclass
class CentroidModel:
    centroids: list[np.ndarray]
    classes: np.ndarray
    gamma: float


def _prepare(series) -> list[np.ndarray]:
    series = [as_series(y, f"series[{k}]") for k, y in enumerate(series)]
    if not series:
        raise ValueError("empty dataset")
    return series


def distance_matrix(centroids, series, gamma: float) -> np.ndarray:
    """``D[i, j] = sdtw(centroid_j, series_i)``."""
    gamma = check_gamma(gamma)
    return np.array([[sdtw(c, y, gamma) for c in centroids] for y in series])


def kmeans_objective(centroids, series, gamma: float) -> float:
    """``sum_i (1 / m_i) * min_j sdtw(x_j, y_i)``."""
    series = _prepare(series)
    dist = distance_matrix(centroids, series, gamma)
    lengths = np.array([y.shape[1] for y in series])
    return float(np.sum(dist.min(axis=1) / lengths))


def assign_step(centroids, series, gamma: float) -> np.ndarray:
    """Index of the closest centroid for every series (ties to the lowest index)."""
    series = _prepare(series)
    return np.argmin(distance_matrix(centroids, series, gamma), axis=1)


def _cluster_cost(centroid, members, gamma):
    return sum(sdtw(centroid, y, gamma) / y.shape[1] for y in members)


def center_step(
    series,
    assignments,
    centroids,
    gamma: float,
    method: str = "soft",
    config: OptimizerConfig | None = None,
) -> list[np.ndarray]:
    """Recompute each nonempty cluster's barycenter, starting from its centroid.

    A new centroid is kept only if it does not increase the cluster's share
    of the k-means objective. ``method`` is ``"soft"``, ``"dba"`` or
    ``"subgradient"``; the latter two work with plain DTW. Centroids of
    empty clusters are returned unchanged.
    """
    series = _prepare(series)
    config = config or OptimizerConfig()
    eval_gamma = check_gamma(gamma) if method == "soft" else 0.0
    assignments = np.asarray(assignments)
    out = []
    for j, old in enumerate(centroids):
        members = [y for y, a in zip(series, assignments) if a == j]
        if not members:
            out.append(old)
            continue
        problem = BarycenterProblem(members, target_length=old.shape[1])
        new = compute_barycenter(problem, method, gamma, init=old, config=config).barycenter
        if _cluster_cost(new, members, eval_gamma) <= _cluster_cost(old, members, eval_gamma):
            out.append(new)
        else:
            out.append(old)
    return out


def _initial_centroids(series, k, length, init, rng):
    if init == "random":
        idx = rng.choice(len(series), size=k, replace=False)
        return [resample(series[i], length) for i in sorted(idx)]
    if init == "euclidean":
        if any(y.shape[1] != length for y in series):
            raise ValueError("Euclidean initialization needs equal-length series")
        flat = np.stack([y.ravel() for y in series])
        _, labels = kmeans2(flat, k, minit="++", seed=rng)
        cents = []
        for j in range(k):
            members = [y for y, a in zip(series, labels) if a == j]
            if members:
                cents.append(init_euclidean_mean(BarycenterProblem(members, target_length=length)))
            else:
                cents.append(series[int(rng.integers(len(series)))].copy())
        return cents
    raise ValueError(f"unknown init {init!r}; expected 'random' or 'euclidean'")


def _repair_empty(centroids, assignments, series, gamma):
    """Reseed empty clusters with the series farthest from its own centroid."""
    centroids = list(centroids)
    assignments = assignments.copy()
    repaired = False
    for j in range(len(centroids)):
        if np.any(assignments == j):
            continue
        own = np.array([sdtw(centroids[a], y, gamma) / y.shape[1] for y, a in zip(series, assignments)])
        # only take from clusters that keep at least one member
        counts = np.bincount(assignments, minlength=len(centroids))
        own[counts[assignments] <= 1] = -np.inf
        far = int(np.argmax(own))
        if own[far] == -np.inf:
            continue
        centroids[j] = resample(series[far], centroids[j].shape[1])
        assignments[far] = j
        repaired = True
    if repaired:
        # An unused centroid never enters the min, so reseeding it cannot raise
        # the objective. Reassigning exactly keeps the centering step's
        # guarantee; a reseeded cluster may come out empty again at gamma > 0.
        assignments = assign_step(centroids, series, gamma)
    return centroids, assignments


def lloyd_kmeans(
    series,
    k: int,
    gamma: float = 1.0,
    init: str = "random",
    method: str = "soft",
    config: OptimizerConfig | None = None,
    max_outer: int = 30,
    seed: int = 0,
    centroid_length: int | None = None,
) -> ClusteringResult:
    """Lloyd's algorithm with soft-DTW assignments and barycenter centering.

    ``objective_trace`` records the k-means objective (at ``gamma`` for the
    soft method, at 0 for DBA and subgradient) after each assignment step.
    Stops when assignments stop changing or after ``max_outer`` rounds.
    """
    series = _prepare(series)
    if not 1 <= k <= len(series):
        raise ValueError(f"need 1 <= k <= {len(series)}, got k={k}")
    config = config or OptimizerConfig(seed=seed)
    gamma = check_gamma(gamma)
    eval_gamma = gamma if method == "soft" else 0.0
    if method == "soft" and gamma <= 0:
        raise ValueError("the soft method needs gamma > 0")
    rng = np.random.default_rng(seed)
    length = centroid_length or int(np.median([y.shape[1] for y in series]))
    centroids = _initial_centroids(series, k, length, init, rng)

    assignments = assign_step(centroids, series, eval_gamma)
    centroids, assignments = _repair_empty(centroids, assignments, series, eval_gamma)
    trace = [kmeans_objective(centroids, series, eval_gamma)]
    n_iter = 0
    for n_iter in range(1, max_outer + 1):
        centroids = center_step(series, assignments, centroids, gamma, method, config)
        new = assign_step(centroids, series, eval_gamma)
        centroids, new = _repair_empty(centroids, new, series, eval_gamma)
        trace.append(kmeans_objective(centroids, series, eval_gamma))
        if np.array_equal(new, assignments):
            break
        assignments = new
    return ClusteringResult(centroids=centroids, assignments=assignments, objective_trace=trace, n_iter=n_iter)


def nearest_centroid_fit(series, labels, gamma: float, config: OptimizerConfig | None = None) -> CentroidModel:
    """One soft-DTW barycenter per class, uniform weights.

    Classes whose series share one length start from the Euclidean mean;
    otherwise from a random member resampled to the median length.
    """
    series = _prepare(series)
    labels = np.asarray(labels)
    if labels.shape != (len(series),):
        raise ValueError("need one label per series")
    config = config or OptimizerConfig()
    gamma = check_gamma(gamma)
    classes = np.unique(labels)
    centroids = []
    for c in classes:
        members = [y for y, l in zip(series, labels) if l == c]
        problem = BarycenterProblem(members)
        if np.all(problem.lengths == problem.target_length):
            init = init_euclidean_mean(problem)
        else:
            init = init_random(problem, config.seed)
        if gamma > 0:
            centroids.append(compute_barycenter(problem, "soft", gamma, init, config).barycenter)
        else:
            centroids.append(compute_barycenter(problem, "dba", 0.0, init, config).barycenter)
    return CentroidModel(centroids=centroids, classes=classes, gamma=gamma)


def nearest_centroid_predict(model: CentroidModel, x):
    """Class whose centroid has the smallest length-normalized soft-DTW to ``x``."""
    scores = [sdtw(c, x, model.gamma) / c.shape[1] for c in model.centroids]
    return model.classes[int(np.argmin(scores))]


def nearest_centroid_accuracy(model: CentroidModel, series, labels) -> float:
    pred = np.array([nearest_centroid_predict(model, x) for x in series])
    return float(np.mean(pred == np.asarray(labels)))


def gamma_grid(n: int = 15, low: float = 1e-3, high: float = 10.0) -> np.ndarray:
    return np.logspace(np.log10(low), np.log10(high), n)


def select_gamma(train, validation, candidates=None, config: OptimizerConfig | None = None):
    """Pick the candidate gamma with the best validation accuracy.

    ``train`` and ``validation`` are ``(series, labels)`` pairs. Ties go to
    the smaller gamma. Returns ``(gamma, accuracies)``.
    """
    candidates = gamma_grid() if candidates is None else np.asarray(candidates, dtype=np.float64)
    val_series, val_labels = validation
    if len(val_series) == 0:
        raise ValueError("empty validation set")
    accuracies = []
    for g in candidates:
        model = nearest_centroid_fit(train[0], train[1], g, config)
        accuracies.append(nearest_centroid_accuracy(model, val_series, val_labels))
    accuracies = np.array(accuracies)
    best = max(range(len(candidates)), key=lambda i: (accuracies[i], -candidates[i]))
    return float(candidates[best]), accuracies


def adjusted_rand_index(labels_true, labels_pred) -> float:
    """Adjusted Rand index between two flat partitions."""
    _, a = np.unique(np.asarray(labels_true), return_inverse=True)
    _, b = np.unique(np.asarray(labels_pred), return_inverse=True)
    table = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(table, (a, b), 1)

    def pairs(v):
        return float(np.sum(v * (v - 1) / 2))

    index = pairs(table)
    rows, cols = pairs(table.sum(axis=1)), pairs(table.sum(axis=0))
    total = pairs(np.array([float(len(a))]))
    expected = rows * cols / total if total else 0.0
    maximum = 0.5 * (rows + cols)
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)
