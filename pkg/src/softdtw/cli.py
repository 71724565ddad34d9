"""Command-line drivers: ``softdtw {dist,grad,barycenter,kmeans,classify,predict,verify}``.

Exit codes: 0 success, 1 usage or input error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import datetime
import sys
import time
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .barycenter import (
    BARYCENTER_METHODS,
    BarycenterProblem,
    OptimizerConfig,
    barycenter_objective,
    compute_barycenter,
    dtw_loss,
    init_euclidean_mean,
    init_random,
)
from .clustering import (
    adjusted_rand_index,
    gamma_grid,
    kmeans_objective,
    lloyd_kmeans,
    nearest_centroid_accuracy,
    nearest_centroid_fit,
    select_gamma,
)
from .core import alignment_matrix, jacobian_apply, sdtw
from .io import Dataset, ExperimentReport, emit_report, format_report, load_ucr, split_dataset
from .prediction import TrainingConfig, evaluate_predictor, make_pairs, save_params, train_predictor
from .verify import run_checks

EXIT_USAGE = 1
EXIT_VERIFY = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for a named purpose derived from the run seed."""
    return np.random.default_rng([seed, zlib.crc32(name.encode()), *extra])


def _fmt(v: float) -> str:
    return repr(float(v))


def _csv(rows) -> str:
    return "\n".join(",".join(_fmt(v) for v in row) for row in np.atleast_2d(rows))


def _read_series(token: str) -> list[np.ndarray]:
    """A UCR file path, or inline values: ``0,1,2`` (``;`` separates feature rows)."""
    if Path(token).exists():
        return load_ucr(token).series
    try:
        rows = [[float(v) for v in row.replace(" ", ",").split(",") if v] for row in token.split(";")]
    except ValueError:
        raise UsageError(f"{token!r} is neither a readable file nor a list of numbers") from None
    if not rows or any(len(r) == 0 for r in rows) or len({len(r) for r in rows}) != 1:
        raise UsageError(f"cannot parse series {token!r}")
    return [np.array(rows)]


def _load(path: str) -> Dataset:
    if not Path(path).is_file():
        raise UsageError(f"cannot read {path}")
    return load_ucr(path)


def _finish(args, report: ExperimentReport, started: float):
    report.config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "report")}
    report.config["version"] = __version__
    report.timings["wall_seconds"] = round(time.perf_counter() - started, 6)
    report.timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    if args.report:
        emit_report(report, args.report)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_dist(args) -> int:
    xs, ys = _read_series(args.x), _read_series(args.y)
    values = np.array([[sdtw(x, y, args.gamma) for y in ys] for x in xs])
    if args.normalize:
        values /= np.array([[x.shape[1] * y.shape[1] for y in ys] for x in xs])
    print(_fmt(values[0, 0]) if values.size == 1 else _csv(values))
    return 0


def cmd_grad(args) -> int:
    x, y = _read_series(args.x)[0], _read_series(args.y)[0]
    value = sdtw(x, y, args.gamma)
    e = alignment_matrix(x, y, args.gamma)
    g = jacobian_apply(x, y, e)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "value.txt").write_text(_fmt(value) + "\n")
        (out / "alignment.csv").write_text(_csv(e) + "\n")
        (out / "gradient.csv").write_text(_csv(g) + "\n")
    print("# value")
    print(_fmt(value))
    print("# alignment")
    print(_csv(e))
    print("# gradient")
    print(_csv(g))
    return 0


def cmd_barycenter(args) -> int:
    started = time.perf_counter()
    data = _load(args.data)
    config = OptimizerConfig(max_iterations=args.max_iter, seed=args.seed)
    labels = data.labels if data.labels is not None else np.zeros(len(data), dtype=np.int64)
    classes = np.unique(labels)
    rows = []
    for rep in range(args.repeats):
        rng = substream(args.seed, "sampling", rep)
        cls = classes[int(rng.integers(len(classes)))]
        members = np.flatnonzero(labels == cls)
        chosen = np.sort(rng.choice(members, size=min(args.n_series, len(members)), replace=False))
        problem = BarycenterProblem([data.series[i] for i in chosen])
        if args.init == "euclidean":
            init = init_euclidean_mean(problem)
        else:
            init = init_random(problem, substream(args.seed, "init", rep))
        result = compute_barycenter(problem, args.method, args.gamma, init, config)
        objective_gamma = args.gamma if args.method == "soft" else 0.0
        rows.append(
            {
                "repeat": rep,
                "class": int(cls),
                "n_series": len(chosen),
                "initial_objective": barycenter_objective(init, problem, objective_gamma),
                "final_objective": result.trace[-1],
                "initial_dtw_loss": dtw_loss(init, problem),
                "final_dtw_loss": dtw_loss(result.barycenter, problem),
                "iterations": len(result.history) - 1,
                "diverged": result.diverged,
            }
        )
    print("repeat,class,initial_objective,final_objective,final_dtw_loss")
    for r in rows:
        print(f"{r['repeat']},{r['class']},{_fmt(r['initial_objective'])},{_fmt(r['final_objective'])},{_fmt(r['final_dtw_loss'])}")
    mean_loss = float(np.mean([r["final_dtw_loss"] for r in rows]))
    print(f"mean_final_dtw_loss,{_fmt(mean_loss)}")
    report = ExperimentReport(
        "barycenter",
        metrics={"mean_final_dtw_loss": mean_loss, "any_diverged": any(r["diverged"] for r in rows)},
        tables={"repeats": rows},
    )
    _finish(args, report, started)
    return 0


def cmd_kmeans(args) -> int:
    started = time.perf_counter()
    data = _load(args.data)
    k = args.k or (len(data.classes) if data.labels is not None else 2)
    config = OptimizerConfig(max_iterations=args.inner_iter, seed=args.seed)
    result = lloyd_kmeans(
        data.series, k, args.gamma, init=args.init, method=args.method, config=config,
        max_outer=args.outer_iter, seed=args.seed,
    )
    metrics = {
        "k": k,
        "outer_iterations": result.n_iter,
        "final_objective": result.objective_trace[-1],
        "dtw_kmeans_loss": kmeans_objective(result.centroids, data.series, 0.0),
    }
    if data.labels is not None:
        metrics["adjusted_rand_index"] = adjusted_rand_index(data.labels, result.assignments)
    for key in sorted(metrics):
        print(f"{key},{metrics[key] if isinstance(metrics[key], int) else _fmt(metrics[key])}")
    print("assignments," + " ".join(str(int(a)) for a in result.assignments))
    report = ExperimentReport(
        "kmeans",
        metrics=metrics,
        tables={
            "trace": [{"iteration": i, "objective": v} for i, v in enumerate(result.objective_trace)],
            "assignments": [{"index": i, "cluster": int(a)} for i, a in enumerate(result.assignments)],
        },
    )
    _finish(args, report, started)
    return 0


def cmd_classify(args) -> int:
    started = time.perf_counter()
    if args.test:
        train_all, test = _load(args.train), _load(args.test)
        train, val = split_dataset(train_all, (2 / 3, 1 / 3), seed=int(substream(args.seed, "split").integers(2**31)))
    else:
        train, val, test = split_dataset(_load(args.train), (0.5, 0.25, 0.25), seed=int(substream(args.seed, "split").integers(2**31)))
    for part in (train, val, test):
        if part.labels is None:
            raise UsageError("classification needs labeled data")
    config = OptimizerConfig(max_iterations=args.max_iter, seed=args.seed)
    grid = gamma_grid(args.n_gammas, args.gamma_min, args.gamma_max)
    gamma, accuracies = select_gamma((train.series, train.labels), (val.series, val.labels), grid, config)
    model = nearest_centroid_fit(train.series + val.series, np.concatenate([train.labels, val.labels]), gamma, config)
    test_acc = nearest_centroid_accuracy(model, test.series, test.labels)
    for g, a in zip(grid, accuracies):
        print(f"gamma={_fmt(g)},validation_accuracy={_fmt(a)}")
    print(f"selected_gamma,{_fmt(gamma)}")
    print(f"test_accuracy,{_fmt(test_acc)}")
    report = ExperimentReport(
        "classify",
        metrics={"selected_gamma": gamma, "test_accuracy": test_acc, "sizes": [len(train), len(val), len(test)]},
        tables={"validation": [{"gamma": float(g), "accuracy": float(a)} for g, a in zip(grid, accuracies)]},
    )
    _finish(args, report, started)
    return 0


def cmd_predict(args) -> int:
    started = time.perf_counter()
    if args.test:
        train, test = _load(args.train), _load(args.test)
    else:
        train, test = split_dataset(_load(args.train), (0.75, 0.25), seed=int(substream(args.seed, "split").integers(2**31)))
    for part in (train, test):
        if not part.equal_length:
            raise UsageError("prediction needs equal-length series")
    x_tr, y_tr = make_pairs(train.series, args.fraction)
    x_te, y_te = make_pairs(test.series, args.fraction)
    config = TrainingConfig(
        loss=args.loss, gamma=args.gamma if args.loss == "sdtw" else None, epochs=args.epochs,
        batch_size=args.batch_size, hidden=args.hidden, lr=args.lr, seed=args.seed, init=args.init,
    )
    result = train_predictor(x_tr, y_tr, config)
    test_dtw, test_euc = evaluate_predictor(result.params, x_te, y_te)
    metrics = {"final_training_loss": result.history[-1], "test_dtw_loss": test_dtw, "test_euclidean_loss": test_euc}
    for key in sorted(metrics):
        print(f"{key},{_fmt(metrics[key])}")
    if args.save:
        save_params(result.params, args.save, {"training": vars(config), "fraction": args.fraction})
    report = ExperimentReport(
        "predict",
        metrics=metrics,
        tables={"history": [{"epoch": i + 1, "phase": ph, "loss": v} for i, (ph, v) in enumerate(zip(result.phases, result.history))]},
    )
    _finish(args, report, started)
    return 0


def cmd_verify(args) -> int:
    started = time.perf_counter()
    results = run_checks(args.seed)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    report = ExperimentReport(
        "verify",
        metrics={"passed": ok},
        tables={"checks": [{"check": r.name, "passed": r.passed, "error": r.error, "tolerance": r.tolerance} for r in results]},
    )
    _finish(args, report, started)
    return 0 if ok else EXIT_VERIFY


# ---------------------------------------------------------------------------


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg_float(s):
    v = float(s)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="softdtw", description="Soft-DTW values, gradients, barycenters, clustering and prediction.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, report=True):
        p.add_argument("--seed", type=int, default=0)
        if report:
            p.add_argument("--report", help="write a report document to this path")

    p = sub.add_parser("dist", help="soft-DTW value(s) between series")
    p.add_argument("x", help="UCR file or inline values such as 0,1,2")
    p.add_argument("y", help="UCR file or inline values")
    p.add_argument("--gamma", type=_nonneg_float, default=1.0)
    p.add_argument("--normalize", action="store_true", help="divide each value by n*m")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("grad", help="value, alignment matrix and gradient w.r.t. x")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--gamma", type=_nonneg_float, default=1.0)
    p.add_argument("--out", help="also write value.txt, alignment.csv, gradient.csv here")
    p.set_defaults(func=cmd_grad)

    p = sub.add_parser("barycenter", help="barycenters of random same-class samples")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=BARYCENTER_METHODS, default="soft")
    p.add_argument("--gamma", type=_nonneg_float, default=1.0)
    p.add_argument("--init", choices=("random", "euclidean"), default="random")
    p.add_argument("--max-iter", type=_positive_int, default=100)
    p.add_argument("--repeats", type=_positive_int, default=10)
    p.add_argument("--n-series", type=_positive_int, default=10)
    common(p)
    p.set_defaults(func=cmd_barycenter)

    p = sub.add_parser("kmeans", help="Lloyd's k-means under soft-DTW")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=_positive_int, default=None, help="default: number of classes")
    p.add_argument("--method", choices=BARYCENTER_METHODS, default="soft")
    p.add_argument("--gamma", type=_nonneg_float, default=1.0)
    p.add_argument("--init", choices=("random", "euclidean"), default="random")
    p.add_argument("--outer-iter", type=_positive_int, default=30)
    p.add_argument("--inner-iter", type=_positive_int, default=100)
    common(p)
    p.set_defaults(func=cmd_kmeans)

    p = sub.add_parser("classify", help="nearest-centroid classifier with validated gamma")
    p.add_argument("--train", required=True, help="labeled UCR file (split 50/25/25 when --test is absent)")
    p.add_argument("--test")
    p.add_argument("--n-gammas", type=_positive_int, default=15)
    p.add_argument("--gamma-min", type=float, default=1e-3)
    p.add_argument("--gamma-max", type=float, default=10.0)
    p.add_argument("--max-iter", type=_positive_int, default=100)
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("predict", help="train an MLP to predict the end of each series")
    p.add_argument("--train", required=True)
    p.add_argument("--test")
    p.add_argument("--loss", choices=("euclidean", "sdtw"), default="euclidean")
    p.add_argument("--gamma", type=_nonneg_float, default=1.0)
    p.add_argument("--init", choices=("random", "euclidean-warm-start"), default="random")
    p.add_argument("--fraction", type=float, default=0.6)
    p.add_argument("--epochs", type=_positive_int, default=200)
    p.add_argument("--hidden", type=_positive_int, default=64)
    p.add_argument("--batch-size", type=_positive_int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--save", help="write trained parameters here (plus a .json sidecar)")
    common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("verify", help="oracle and finite-difference self-checks")
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"softdtw {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
