"""UCR-format datasets, seeded splits and experiment reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MISSING = {"", "nan", "NaN", "NAN", "?"}


@dataclass
class Dataset:
    """Labeled univariate series, as read from a UCR file.

    ``label_map`` is filled only when the file's labels were not integers;
    it maps each original label to the integer used in ``labels``.
    """

    series: list[np.ndarray]
    labels: np.ndarray | None = None
    name: str = ""
    label_map: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.series = [np.atleast_2d(np.asarray(s, dtype=np.float64)) for s in self.series]
        if any(s.shape[1] == 0 for s in self.series):
            raise ValueError("dataset contains an empty series")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.series),):
                raise ValueError("labels must align one-to-one with series")

    def __len__(self) -> int:
        return len(self.series)

    def subset(self, idx, name: str | None = None) -> "Dataset":
        idx = list(idx)
        labels = None if self.labels is None else self.labels[idx]
        return Dataset([self.series[i] for i in idx], labels, name or self.name, dict(self.label_map))

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels) if self.labels is not None else np.array([], dtype=np.int64)

    @property
    def equal_length(self) -> bool:
        return len({s.shape[1] for s in self.series}) == 1


def _detect_delimiter(line: str) -> str:
    return "\t" if "\t" in line else ","


def _parse_label(token: str):
    try:
        value = float(token)
    except ValueError:
        return None
    if math.isfinite(value) and value == int(value):
        return int(value)
    return None


def load_ucr(path) -> Dataset:
    """Read a UCR file: one series per row, class label first.

    Comma- and tab-separated files are both accepted (detected from the
    first data row). Rows may differ in length. Missing-value tokens at the
    end of a row are dropped; anywhere else they are an error.
    """
    path = Path(path)
    text = path.read_text()
    lines = [(k + 1, ln) for k, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    delim = _detect_delimiter(lines[0][1])
    raw_labels, series = [], []
    for lineno, line in lines:
        tokens = [t.strip() for t in line.strip().split(delim)]
        if len(tokens) < 2:
            raise ValueError(f"{path}:{lineno}: expected a label followed by values")
        values = tokens[1:]
        while values and values[-1] in MISSING:
            values.pop()
        if not values:
            raise ValueError(f"{path}:{lineno}: row has no values")
        try:
            arr = np.array([float(v) if v not in MISSING else np.nan for v in values])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{path}:{lineno}: missing or non-finite value inside the series")
        raw_labels.append(tokens[0])
        series.append(arr)
    parsed = [_parse_label(t) for t in raw_labels]
    label_map: dict[str, int] = {}
    if all(v is not None for v in parsed):
        labels = np.array(parsed, dtype=np.int64)
    else:
        for t in raw_labels:
            label_map.setdefault(t, len(label_map))
        labels = np.array([label_map[t] for t in raw_labels], dtype=np.int64)
    return Dataset(series, labels, path.stem, label_map)


def write_ucr(dataset: Dataset, path, delimiter: str = ",") -> None:
    """Write univariate series in UCR layout with round-trip float formatting."""
    with open(path, "w") as fh:
        for k, s in enumerate(dataset.series):
            if s.shape[0] != 1:
                raise ValueError("UCR files hold univariate series only")
            label = dataset.labels[k] if dataset.labels is not None else 0
            fh.write(delimiter.join([str(int(label))] + [repr(float(v)) for v in s[0]]) + "\n")


def _allocate(total: int, fractions) -> list[int]:
    raw = np.asarray(fractions) * total
    sizes = np.floor(raw).astype(int)
    remainder = total - sizes.sum()
    order = np.argsort(-(raw - sizes), kind="stable")
    sizes[order[:remainder]] += 1
    return sizes.tolist()


def split_dataset(dataset: Dataset, fractions=(0.5, 0.25, 0.25), seed: int = 0) -> list[Dataset]:
    """Shuffle with ``seed`` and cut into contiguous parts of the given fractions.

    With labels, items are first shuffled within each class and interleaved
    by within-class rank, so every contiguous part gets a near-proportional
    share of each class.
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    if np.any(fractions <= 0) or not math.isclose(fractions.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("fractions must be positive and sum to 1")
    rng = np.random.default_rng(seed)
    n = len(dataset)
    if dataset.labels is None:
        order = rng.permutation(n)
    else:
        keys = np.empty(n)
        for c in np.unique(dataset.labels):
            idx = np.flatnonzero(dataset.labels == c)
            idx = idx[rng.permutation(len(idx))]
            keys[idx] = (np.arange(len(idx)) + rng.uniform()) / len(idx)
        order = np.lexsort((rng.permutation(n), keys))
    sizes = _allocate(n, fractions)
    if min(sizes) == 0:
        raise ValueError(f"split sizes {sizes} leave a part empty")
    parts, start = [], 0
    for k, size in enumerate(sizes):
        parts.append(dataset.subset(order[start : start + size], f"{dataset.name}[{k}]"))
        start += size
    return parts


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class ExperimentReport:
    """Everything needed to rerun an experiment, plus its results.

    ``tables`` maps a name to a list of row dicts; all rows of a table share
    the same keys.
    """

    command: str
    config: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    timestamp: str = ""


def _numpy_default(obj):
    if isinstance(obj, (np.generic, np.ndarray)):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _dumps(value) -> str:
    return json.dumps(value, sort_keys=True, default=_numpy_default)


def _kv_lines(section: str, mapping: dict) -> list[str]:
    lines = [f"[{section}]"]
    for key in sorted(mapping):
        lines.append(f"{key} = {_dumps(mapping[key])}")
    return lines


def format_report(report: ExperimentReport) -> str:
    lines = ["# soft-DTW experiment report"]
    lines += _kv_lines("meta", {"command": report.command, "timestamp": report.timestamp})
    lines += _kv_lines("config", report.config)
    lines += _kv_lines("metrics", report.metrics)
    lines += _kv_lines("timing", report.timings)
    for name in sorted(report.tables):
        rows = report.tables[name]
        lines.append(f"[table {name}]")
        if rows:
            buf = io.StringIO()
            writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _dumps(v) if not isinstance(v, str) else v for k, v in row.items()})
            lines += buf.getvalue().rstrip("\n").split("\n")
        lines.append("[end]")
    return "\n".join(lines) + "\n"


def emit_report(report: ExperimentReport, path) -> None:
    """Write the report as sectioned ``key = json`` lines and CSV table blocks."""
    Path(path).write_text(format_report(report))


def _cell(value: str):
    try:
        return json.loads(value)
    except (json.JSONDecodeError, ValueError):
        return value


def parse_report(text_or_path) -> ExperimentReport:
    """Inverse of :func:`format_report`; accepts the text or a path to it."""
    text = str(text_or_path)
    if "\n" not in text and Path(text).exists():
        text = Path(text).read_text()
    sections: dict[str, dict] = {}
    tables: dict[str, list[dict]] = {}
    current = None
    table_lines: list[str] = []
    table_name = None
    for line in text.splitlines():
        if table_name is not None:
            if line == "[end]":
                rows = list(csv.DictReader(io.StringIO("\n".join(table_lines))))
                tables[table_name] = [{k: _cell(v) for k, v in r.items()} for r in rows]
                table_name, table_lines = None, []
            else:
                table_lines.append(line)
            continue
        if not line or line.startswith("#"):
            continue
        if line.startswith("[table ") and line.endswith("]"):
            table_name = line[len("[table ") : -1]
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = {}
            continue
        key, _, value = line.partition(" = ")
        sections[current][key] = json.loads(value)
    meta = sections.get("meta", {})
    return ExperimentReport(
        command=meta.get("command", ""),
        config=sections.get("config", {}),
        metrics=sections.get("metrics", {}),
        tables=tables,
        timings=sections.get("timing", {}),
        timestamp=meta.get("timestamp", ""),
    )


def strip_volatile(text: str) -> str:
    """Drop the timestamp line and the ``[timing]`` section for run-to-run comparison."""
    out, skipping = [], False
    for line in text.splitlines():
        if line.startswith("["):
            skipping = line == "[timing]"
        if skipping or line.startswith("timestamp = "):
            continue
        out.append(line)
    return "\n".join(out)
