"""Self-checks: dynamic programs against the exhaustive oracles, gradients
against central finite differences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .core import cost_matrix, sdtw_backward, sdtw_forward, sdtw_value_and_grad
from .prediction import init_params, training_loss, training_value_and_grad


@dataclass
class CheckResult:
    name: str
    passed: bool
    error: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: max error {self.error:.3e} (tolerance {self.tolerance:.0e})"


def numerical_gradient(fun, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function of an array."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + eps
        up = fun(x)
        flat[k] = old - eps
        down = fun(x)
        flat[k] = old
        gflat[k] = (up - down) / (2 * eps)
    return grad


def relative_error(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def check_values(rng, cases=50, tol=1e-10) -> CheckResult:
    worst = 0.0
    for _ in range(cases):
        p = int(rng.choice([1, 3]))
        n, m = rng.integers(1, 6, size=2)
        x, y = rng.standard_normal((p, n)), rng.standard_normal((p, m))
        for gamma in (0.0, 0.1, 1.0, 10.0):
            ref = oracle.brute_force_sdtw(x, y, gamma)
            got = sdtw_forward(x, y, gamma).value
            worst = max(worst, abs(got - ref) / max(abs(ref), 1e-300))
    return CheckResult("forward value vs enumeration", worst <= tol, worst, tol)


def check_alignments(rng, cases=20, tol=1e-8) -> CheckResult:
    worst = 0.0
    for _ in range(cases):
        p = int(rng.choice([1, 3]))
        n, m = rng.integers(1, 6, size=2)
        x, y = rng.standard_normal((p, n)), rng.standard_normal((p, m))
        for gamma in (0.1, 1.0, 10.0):
            e = sdtw_backward(sdtw_forward(x, y, gamma), cost_matrix(x, y))
            brute = oracle.brute_force_expected_alignment(x, y, gamma)
            quartic = oracle.average_alignment_forward(x, y, gamma)
            worst = max(worst, np.abs(e - brute).max(), np.abs(e - quartic).max(), np.abs(brute - quartic).max())
    return CheckResult("backward alignment vs enumeration vs quartic recursion", worst <= tol, worst, tol)


def check_series_gradient(rng, cases=20, tol=1e-5) -> CheckResult:
    worst = 0.0
    for _ in range(cases):
        n, m = rng.integers(2, 13, size=2)
        gamma = float(rng.choice([0.1, 1.0]))
        x, y = rng.standard_normal((1, n)), rng.standard_normal((1, m))
        _, g = sdtw_value_and_grad(x, y, gamma)
        num = numerical_gradient(lambda z: sdtw_forward(z, y, gamma).value, x)
        worst = max(worst, relative_error(g, num))
    return CheckResult("series gradient vs finite differences", worst <= tol, worst, tol)


def check_mlp_gradient(rng, cases=3, tol=1e-4) -> CheckResult:
    worst = 0.0
    for _ in range(cases):
        t, h, out, batch = 6, 5, 4, 3
        params = init_params(t, out, h, rng)
        params = params.map(lambda w: w + 0.1 * rng.standard_normal(w.shape))
        inputs = rng.standard_normal((batch, 1, t))
        targets = rng.standard_normal((batch, 1, out))
        for loss, gamma in (("euclidean", None), ("sdtw", 0.1), ("sdtw", 1.0)):
            _, grad = training_value_and_grad(params, inputs, targets, loss, gamma)
            for name, arr in params.arrays().items():

                def f(w, name=name):
                    trial = params.copy()
                    setattr(trial, name, w)
                    return training_loss(trial, inputs, targets, loss, gamma)

                worst = max(worst, relative_error(getattr(grad, name), numerical_gradient(f, arr)))
    return CheckResult("MLP parameter gradient vs finite differences", worst <= tol, worst, tol)


def run_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [check_values(rng), check_alignments(rng), check_series_gradient(rng), check_mlp_gradient(rng)]
