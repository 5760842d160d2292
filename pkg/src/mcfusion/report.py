"""Figure rendering for results CSVs.

``render_report`` reads a CSV produced by the ``run`` command, picks the
figure layout matching its experiment column, and writes PNG files next to
the delimited output (or into an explicit directory).  Rendering is a pure
post-processing step over the CSV — it never recomputes results.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["render_report"]

# Probabilities below the CSV underflow sentinel plot at this floor.
_SENTINEL_VALUE = 1e-300

_MARKERS = "osd^vPX*"


def _parse(value: str):
    if value == "":
        return None
    if value == "<1e-300":
        return _SENTINEL_VALUE
    try:
        return float(value)
    except ValueError:
        return value


def read_rows(csv_path: str) -> list[dict]:
    """Rows of a results CSV with numeric fields parsed to floats."""
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [{k: _parse(v) for k, v in row.items()} for row in reader]
    if not rows:
        raise ValueError(f"{csv_path} has no result rows")
    return rows


def _detectors(rows) -> list[str]:
    seen = []
    for row in rows:
        if row["detector"] not in seen:
            seen.append(row["detector"])
    return seen


def _style(i: int) -> dict:
    return {"marker": _MARKERS[i % len(_MARKERS)], "markersize": 4}


def _save(fig, out_dir: str, stem: str, suffix: str) -> str:
    path = os.path.join(out_dir, f"{stem}_{suffix}.png")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def _fig_roc(rows, out_dir, stem):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for i, det in enumerate(_detectors(rows)):
        pts = [(r["pfa"], r["pd"]) for r in rows if r["detector"] == det]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=det,
                **_style(i))
    ax.set_xlabel("false-alarm probability")
    ax.set_ylabel("detection probability")
    ax.set_title("receiver operating characteristic")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return [_save(fig, out_dir, stem, "roc")]


def _fig_validate(rows, out_dir, stem):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for i, det in enumerate(_detectors(rows)):
        ana = sorted((r["target_pfa"], r["pm"]) for r in rows
                     if r["detector"] == det and r["method"] == "analytic")
        sim = sorted((r["target_pfa"], r["pm"]) for r in rows
                     if r["detector"] == det and r["method"] == "monte-carlo")
        line, = ax.semilogy([p[0] for p in ana], [max(p[1], _SENTINEL_VALUE) for p in ana],
                            label=f"{det} (analytic)")
        ax.semilogy([p[0] for p in sim], [max(p[1], _SENTINEL_VALUE) for p in sim],
                    linestyle="none", color=line.get_color(),
                    label=f"{det} (simulated)", **_style(i))
    ax.set_xlabel("calibrated false-alarm target")
    ax.set_ylabel("miss probability")
    ax.set_title("closed-form curves vs Monte Carlo estimates")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return [_save(fig, out_dir, stem, "validate")]


def _sweep_axis(rows) -> str:
    for axis in ("A", "J", "M", "N", "L", "trials"):
        values = {r[axis] for r in rows}
        if len(values) > 1:
            return axis
    return "A"


def _fig_sweep(rows, out_dir, stem):
    axis = _sweep_axis(rows)
    fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.2), sharex=True)
    for i, det in enumerate(_detectors(rows)):
        pts = sorted((r[axis], r["pm"], r["pfa"]) for r in rows
                     if r["detector"] == det)
        xs = [p[0] for p in pts]
        axes[0].semilogy(xs, [max(p[1], _SENTINEL_VALUE) for p in pts],
                         label=det, **_style(i))
        axes[1].semilogy(xs, [max(p[2], _SENTINEL_VALUE) for p in pts],
                         label=det, **_style(i))
    axes[0].set_ylabel("miss probability")
    axes[1].set_ylabel("false-alarm probability")
    for ax in axes:
        ax.set_xlabel(axis)
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.suptitle(f"error rates against {axis} at a fixed false-alarm target")
    return [_save(fig, out_dir, stem, "sweep")]


def _fig_exponent(rows, out_dir, stem):
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    curves = [r for r in rows if r["status"] == "ok"]
    optima = [r for r in rows if r["status"] == "optimum"]
    gains = sorted({r["A"] for r in curves})
    for i, a_value in enumerate(gains):
        for det in _detectors(curves):
            sel = [r for r in curves
                   if r["A"] == a_value and r["detector"] == det]
            sel.sort(key=lambda r: r["s"])
            xs = [r["s"] for r in sel]
            line, = ax.plot(xs, [r["ex0"] for r in sel],
                            label=f"{det}, gain {a_value:g}: normal-side")
            ax.plot(xs, [r["ex1"] for r in sel], linestyle="--",
                    color=line.get_color(),
                    label=f"{det}, gain {a_value:g}: abnormal-side")
    for r in optima:
        if r["s"] is not None and r["ex0"] is not None:
            ax.plot([r["s"]], [r["ex0"]], marker="*", markersize=10,
                    color="black")
    ax.set_xlabel("tilt s")
    ax.set_ylabel("error exponent")
    ax.set_title("tilted error exponents with grid optima")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    return [_save(fig, out_dir, stem, "exponent")]


def _fig_bound_vs_m(rows, out_dir, stem):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    series = {
        "analytic": ("exact max(Pfa, Pm)", "o", "-"),
        "monte-carlo": ("simulated max(Pfa, Pm)", "s", "none"),
        "chernoff-bound": ("exponential upper bound", "^", "--"),
    }
    for method, (label, marker, linestyle) in series.items():
        pts = sorted((r["M"], max(r["pfa"], r["pm"])) for r in rows
                     if r["method"] == method)
        if not pts:
            continue
        ax.semilogy([p[0] for p in pts],
                    [max(p[1], _SENTINEL_VALUE) for p in pts],
                    marker=marker, linestyle=linestyle, label=label)
    ax.set_xlabel("number of sensors")
    ax.set_ylabel("error probability")
    ax.set_title("balanced error vs sensor count, with the Chernoff bound")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return [_save(fig, out_dir, stem, "bound_vs_m")]


_RENDERERS = {
    "roc": _fig_roc,
    "validate": _fig_validate,
    "sweep": _fig_sweep,
    "exponent": _fig_exponent,
    "bound-vs-m": _fig_bound_vs_m,
}


def render_report(csv_path: str, out_dir: str) -> list[str]:
    """Render the figures for one results CSV; returns the written paths."""
    rows = read_rows(csv_path)
    experiment = rows[0]["experiment"]
    renderer = _RENDERERS.get(experiment)
    if renderer is None:
        raise ValueError(f"no figure layout for experiment {experiment!r}")
    stem = os.path.splitext(os.path.basename(csv_path))[0]
    return renderer(rows, out_dir, stem)
