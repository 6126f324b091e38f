#!/usr/bin/env python3
"""Render benchmark CSVs into figures.

Consumes the harness's results CSV (header: method,instance,run,step,
rel_dist,sq_a_dist,wall_time_s) and writes one figure per invocation:

    plots.py --kind trajectory --in results.csv --out fig.png [--stat std|sem]
    plots.py --kind laststep   --in results.csv --out fig.png
    plots.py --kind probe      --in probe.csv   --out fig.png
    plots.py --kind misspec    --in shd0.csv shd1.csv ... --out fig.png
"""

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

EXPECTED_COLUMNS = [
    "method",
    "instance",
    "run",
    "step",
    "rel_dist",
    "sq_a_dist",
    "wall_time_s",
]

# one fixed color per method so figures are comparable across runs
METHOD_COLORS = {
    "civ": "#1f77b4",
    "civ_ow": "#17becf",
    "random": "#7f7f7f",
    "greedy": "#ff7f0e",
    "maxv": "#2ca02c",
    "cv": "#d62728",
    "ucb": "#9467bd",
    "ei_mc": "#8c564b",
    "mi_mc": "#e377c2",
}
FALLBACK_COLOR = "#bcbd22"


class SchemaError(ValueError):
    pass


def load_rows(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in EXPECTED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for r in reader:
            rows.append(
                {
                    "method": r["method"],
                    "instance": int(r["instance"]),
                    "run": int(r["run"]),
                    "step": int(r["step"]),
                    "rel_dist": float(r["rel_dist"]),
                }
            )
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def color_for(method):
    return METHOD_COLORS.get(method, FALLBACK_COLOR)


def _series(rows):
    """rel_dist grouped per (method, step), preserving method order."""
    methods = list(dict.fromkeys(r["method"] for r in rows))
    grouped = defaultdict(list)
    for r in rows:
        grouped[(r["method"], r["step"])].append(r)
    return methods, grouped


def plot_trajectory(rows, ax, stat):
    methods, grouped = _series(rows)
    steps = sorted({r["step"] for r in rows})
    for m in methods:
        mean, band = [], []
        for s in steps:
            cell = grouped[(m, s)]
            vals = np.array([r["rel_dist"] for r in cell])
            mean.append(vals.mean())
            if stat == "sem":
                band.append(vals.std() / np.sqrt(len(vals)))
            else:
                inst_means = [
                    np.mean([r["rel_dist"] for r in cell if r["instance"] == i])
                    for i in sorted({r["instance"] for r in cell})
                ]
                band.append(np.std(inst_means))
        mean, band = np.array(mean), np.array(band)
        ax.plot(steps, mean, label=m, color=color_for(m))
        ax.fill_between(steps, mean - band, mean + band, alpha=0.2, color=color_for(m))
    ax.set_xlabel("step")
    ax.set_ylabel("relative distance")
    ax.legend()


def plot_laststep(rows, ax, stat):
    methods, grouped = _series(rows)
    T = max(r["step"] for r in rows)
    means, errs = [], []
    for m in methods:
        vals = np.array([r["rel_dist"] for r in grouped[(m, T)]])
        means.append(vals.mean())
        errs.append(vals.std() / np.sqrt(len(vals)) if stat == "sem" else vals.std())
    ax.bar(methods, means, yerr=errs, color=[color_for(m) for m in methods])
    ax.set_ylabel(f"relative distance at step {T}")


def plot_probe(rows, ax, stat):
    steps = sorted({r["step"] for r in rows})
    by_step = defaultdict(list)
    for r in rows:
        by_step[r["step"]].append(r["rel_dist"])
    mean = np.array([np.mean(by_step[s]) for s in steps])
    ax.plot(steps, mean, color=color_for(rows[0]["method"]), label=rows[0]["method"])
    ax.set_xlabel("step")
    ax.set_ylabel("distance to optimal intervention")
    ax.legend()


def plot_misspec(row_sets, labels, ax, stat):
    methods = list(dict.fromkeys(r["method"] for r in row_sets[0]))
    width = 0.8 / len(methods)
    x = np.arange(len(row_sets))
    for j, m in enumerate(methods):
        means = []
        for rows in row_sets:
            T = max(r["step"] for r in rows)
            vals = [r["rel_dist"] for r in rows if r["method"] == m and r["step"] == T]
            means.append(np.mean(vals))
        ax.bar(x + j * width, means, width, label=m, color=color_for(m))
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(labels)
    ax.set_ylabel("last-step relative distance")
    ax.legend()


def render(kind, in_paths, out_path, stat="std"):
    fig, ax = plt.subplots(figsize=(6, 4))
    if kind == "misspec":
        row_sets = [load_rows(p) for p in in_paths]
        plot_misspec(row_sets, [Path(p).stem for p in in_paths], ax, stat)
    else:
        rows = load_rows(in_paths[0])
        {"trajectory": plot_trajectory, "laststep": plot_laststep, "probe": plot_probe}[
            kind
        ](rows, ax, stat)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def main(argv=None):
    parser = argparse.ArgumentParser(description="benchmark CSV plotting")
    parser.add_argument(
        "--kind", required=True, choices=["trajectory", "laststep", "probe", "misspec"]
    )
    parser.add_argument("--in", dest="inputs", required=True, nargs="+")
    parser.add_argument("--out", required=True)
    parser.add_argument("--stat", choices=["std", "sem"], default="std")
    args = parser.parse_args(argv)
    try:
        render(args.kind, args.inputs, args.out, args.stat)
    except SchemaError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
