"""Deterministic figure rendering from experiment CSV/JSON outputs.

Input contract: the fixed results schema

    seed,alpha,tau,bias_exact,bias_bound,checkpoint_N,regret_RN,slope_fit

(one row per experiment and checkpoint; bias-sweep files carry the basis
count in ``checkpoint_N`` and leave ``regret_RN`` empty), plus the run's
``summary.json``.  Every figure writes a ``<out>.data.json`` sidecar of
exactly the numbers plotted, so tests compare data instead of pixels.
Rendering uses a fixed style and embeds no timestamps.
"""

import csv
import json
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

CSV_COLUMNS = (
    "seed",
    "alpha",
    "tau",
    "bias_exact",
    "bias_bound",
    "checkpoint_N",
    "regret_RN",
    "slope_fit",
)

FIGURE_KINDS = ("regret-ribbon", "bias-decay", "region")


class SchemaError(ValueError):
    """The input CSV does not follow the fixed results schema."""


@dataclass(frozen=True)
class PlotJob:
    kind: str
    csv_path: str
    out_path: str
    summary_path: str = None
    log_x: bool = True
    log_y: bool = True

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"figure kind must be one of {FIGURE_KINDS}, got {self.kind!r}")


def read_results(path):
    """Parse a results CSV into a list of per-row dicts (floats or None)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("results file is empty") from None
        if tuple(header) != CSV_COLUMNS:
            missing = set(CSV_COLUMNS) - set(header)
            raise SchemaError(
                f"unexpected results header {header!r}"
                + (f"; missing column(s) {sorted(missing)}" if missing else "")
            )
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(CSV_COLUMNS):
                raise SchemaError(f"row {line_no} has {len(row)} fields, expected {len(CSV_COLUMNS)}")
            parsed = {}
            for key, field in zip(CSV_COLUMNS, row):
                parsed[key] = None if field == "" else float(field)
            rows.append(parsed)
    return rows


def read_summary(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _ribbon_data(rows):
    by_n = {}
    for row in rows:
        if row["checkpoint_N"] is None or row["regret_RN"] is None:
            raise SchemaError("regret-ribbon needs checkpoint_N and regret_RN in every row")
        by_n.setdefault(int(row["checkpoint_N"]), []).append(row["regret_RN"])
    counts = sorted(by_n)
    if not counts:
        raise SchemaError("no checkpoints found in results")
    n_seeds = {len(v) for v in by_n.values()}
    if len(n_seeds) != 1:
        raise SchemaError("checkpoints are not aligned across seeds")
    lo = [float(np.min(by_n[n])) for n in counts]
    med = [float(np.median(by_n[n])) for n in counts]
    hi = [float(np.max(by_n[n])) for n in counts]
    per_seed = [by_n[n] for n in counts]
    return counts, lo, med, hi, per_seed


def render(job):
    """Render the requested figure and its sidecar; returns the sidecar dict."""
    if job.kind == "region":
        data = _render_region(job)
    else:
        rows = read_results(job.csv_path)
        summary = read_summary(job.summary_path)
        if job.kind == "regret-ribbon":
            data = _render_ribbon(job, rows, summary)
        else:
            data = _render_bias_decay(job, rows, summary)
    with open(job.out_path + ".data.json", "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return data


def _new_axes():
    fig, ax = plt.subplots(figsize=(6.0, 4.2), dpi=120)
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def _render_ribbon(job, rows, summary):
    counts, lo, med, hi, per_seed = _ribbon_data(rows)
    fig, ax = _new_axes()
    ax.fill_between(counts, lo, hi, alpha=0.25, color="tab:blue", label="min-max across runs")
    ax.plot(counts, med, color="tab:blue", lw=1.8, label="median")
    mean_bias = summary.get("mean_bias")
    if mean_bias:
        ax.axhline(mean_bias, color="tab:red", ls="--", lw=1.2,
                   label=f"mean asymptotic bias {mean_bias:.3g}")
    if job.log_x:
        ax.set_xscale("log")
    if job.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("steps N")
    ax.set_ylabel("average regret")
    n_seeds = len(per_seed[0])
    ax.set_title(f"Average regret across {n_seeds} runs")
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, job.out_path)
    return {
        "kind": "regret-ribbon",
        "checkpoint_N": counts,
        "min": lo,
        "median": med,
        "max": hi,
        "per_seed_regret": per_seed,
        "mean_bias": mean_bias,
    }


def _render_bias_decay(job, rows, summary):
    pts = [(int(r["checkpoint_N"]), r["bias_exact"], r["bias_bound"]) for r in rows]
    if any(p[1] is None for p in pts):
        raise SchemaError("bias-decay needs bias_exact in every row")
    pts.sort()
    q_check = [p[0] for p in pts]
    bias = [p[1] for p in pts]
    bound = [p[2] for p in pts]
    fig, ax = _new_axes()
    ax.semilogy(q_check, bias, "o-", color="tab:blue", label="exact asymptotic bias")
    if all(b is not None for b in bound):
        ax.semilogy(q_check, bound, "s--", color="tab:orange", label="geometric ceiling")
    alpha_fit = summary.get("alpha_fit")
    if alpha_fit is not None:
        ax.set_title(f"Bias decay with basis count (fitted constant {alpha_fit:.3g})")
    else:
        ax.set_title("Bias decay with basis count")
    ax.set_xlabel("number of basis functions")
    ax.set_ylabel("steady-state squared gap")
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, job.out_path)
    return {
        "kind": "bias-decay",
        "basis_count": q_check,
        "bias_exact": bias,
        "bias_bound": bound,
        "alpha_fit": alpha_fit,
    }


def _render_region(job):
    with open(job.csv_path, "r", encoding="utf-8") as fh:
        lines = [l for l in fh.read().splitlines() if l]
    grid = []
    source = sensor = None
    for row_idx, line in enumerate(lines):
        grid_row = []
        for col_idx, ch in enumerate(line):
            blocked = 1 if ch == "#" else 0
            if ch == "S":
                source = [col_idx, row_idx]
            elif ch == "o":
                sensor = [col_idx, row_idx]
            grid_row.append(blocked)
        grid.append(grid_row)
    arr = np.asarray(grid)
    fig, ax = plt.subplots(figsize=(4.4, 4.4), dpi=120)
    ax.imshow(arr, cmap="Greys", vmin=0, vmax=1)
    if source is not None:
        ax.plot(source[0], source[1], "x", color="tab:red", ms=10, mew=2, label="source")
    if sensor is not None:
        ax.plot(sensor[0], sensor[1], "o", color="black", ms=8, label="sensor")
    ax.set_title("Room layout (blocked cells shaded)")
    ax.set_xticks([])
    ax.set_yticks([])
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, job.out_path)
    return {"kind": "region", "grid": grid, "source": source, "sensor": sensor}
