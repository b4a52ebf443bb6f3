#!/usr/bin/env python3
"""Render benchmark-sweep charts from the aggregated CSV.

Usage: ``render.py <csv> <outdir>``

The input is the long-format benchmark CSV with columns
``experiment,method,param_bits,stat,metric,value``.  One chart is produced
per (experiment, metric) pair found in the data, written as both PNG and
SVG into the output directory.  Per method the chart shows the mean as a
dashed line, the median as a solid line, and the 25-75 percentile region
as a shaded band; rows with ``stat == "ref"`` are drawn as reference
curves (the information line ``MI`` and the ``UB+c`` codelength bounds).

The output is a pure function of the CSV: re-running overwrites the same
files.  Malformed input (missing columns, unparseable numbers, or no data
rows) aborts with a diagnostic before any file is created.
"""

from __future__ import annotations

import csv
import os
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

EXPECTED_COLUMNS = ["experiment", "method", "param_bits", "stat", "metric", "value"]

# Canonical legend order for the known method tags; anything else follows
# alphabetically after these.
_METHOD_ORDER = ("GPRS", "pGPRS", "sGPRS", "dGPRS", "PFR", "RS")

_BAND = ("q25", "q75")

_AXIS_LABELS = {
    "steps": "steps to acceptance",
    "codelength_bits": "codelength (bits)",
    "censored_frac": "fraction of censored runs",
}


class InputError(ValueError):
    """Raised for malformed CSV input; the message is the user diagnostic."""


def _read_rows(csv_path):
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{csv_path}: file is empty (no header row)") from None
        if header != EXPECTED_COLUMNS:
            missing = [c for c in EXPECTED_COLUMNS if c not in header]
            extra = [c for c in header if c not in EXPECTED_COLUMNS]
            raise InputError(
                f"{csv_path}: header does not match the benchmark schema; "
                f"missing columns {missing}, unexpected columns {extra}"
            )
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(EXPECTED_COLUMNS):
                raise InputError(
                    f"{csv_path}:{lineno}: expected {len(EXPECTED_COLUMNS)} fields, "
                    f"got {len(rec)}"
                )
            experiment, method, param, stat, metric, value = rec
            try:
                rows.append((experiment, method, float(param), stat, metric, float(value)))
            except ValueError:
                raise InputError(
                    f"{csv_path}:{lineno}: param_bits and value must be numbers, "
                    f"got {param!r}, {value!r}"
                ) from None
    if not rows:
        raise InputError(f"{csv_path}: no data rows")
    return rows


def _method_sort_key(method):
    try:
        return (0, _METHOD_ORDER.index(method))
    except ValueError:
        return (1, method)


def _series(rows):
    """{(experiment, metric): {method: {stat: [(param, value), ...]}}}."""
    charts = defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
    for experiment, method, param, stat, metric, value in rows:
        charts[(experiment, metric)][method][stat].append((param, value))
    for methods in charts.values():
        for stats in methods.values():
            for points in stats.values():
                points.sort()
    return charts


def _build_figure(experiment, metric, methods):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    sampled = [m for m, s in methods.items() if "ref" not in s]
    refs = [m for m, s in methods.items() if "ref" in s]
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for i, method in enumerate(sorted(sampled, key=_method_sort_key)):
        stats = methods[method]
        color = colors[i % len(colors)]
        if all(k in stats for k in _BAND):
            lo = [v for _, v in stats["q25"]]
            hi = [v for _, v in stats["q75"]]
            grid = [p for p, _ in stats["q25"]]
            ax.fill_between(grid, lo, hi, color=color, alpha=0.2, linewidth=0.0)
        if "median" in stats:
            ax.plot(
                *zip(*stats["median"]), color=color, linestyle="-", marker="o",
                markersize=3, label=method,
            )
        if "mean" in stats:
            ax.plot(
                *zip(*stats["mean"]), color=color, linestyle="--",
                label=method if "median" not in stats else None,
            )
    for method in sorted(refs, key=_method_sort_key):
        ax.plot(
            *zip(*methods[method]["ref"]), color="black", linestyle=":",
            linewidth=1.0, alpha=0.8, label=method,
        )
    if metric == "steps":
        ax.set_yscale("log")
    ax.set_xlabel("grid value (bits)")
    ax.set_ylabel(_AXIS_LABELS.get(metric, metric))
    ax.set_title(f"{experiment}: {metric}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def build_figures(rows):
    """One matplotlib figure per (experiment, metric), keyed by that pair."""
    return {
        (experiment, metric): _build_figure(experiment, metric, methods)
        for (experiment, metric), methods in sorted(_series(rows).items())
    }


def render(csv_path, out_dir):
    """Render every chart the CSV supports; returns the written paths."""
    rows = _read_rows(csv_path)
    figures = build_figures(rows)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for (experiment, metric), fig in figures.items():
        base = os.path.join(out_dir, f"{experiment}_{metric}")
        for ext in ("png", "svg"):
            path = f"{base}.{ext}"
            fig.savefig(path)
            written.append(path)
        plt.close(fig)
    return written


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: render.py <csv> <outdir>", file=sys.stderr)
        return 2
    try:
        written = render(argv[0], argv[1])
    except InputError as exc:
        print(f"render.py: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"render.py: error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
