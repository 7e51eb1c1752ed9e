"""Figure rendering from experiment artifacts.

Three kinds:

- ``trace``      — per-iteration error curves, seed mean with a min/max
                   band, log-y, plus the evaluated worst-case bound curve
                   overlaid when the summary carries its ingredients;
- ``floor-vs-M`` — final error against batch size (one summary.json per
                   batch size under the input directory), log-log, with a
                   1/M reference line;
- ``sweep``      — measured samples-to-accuracy against 1/eps with the
                   report's fitted line and slope annotation.

Rendering is deterministic: fixed figure geometry and fonts, a pinned
SVG hash salt, and no timestamps, so identical artifacts give
byte-identical vector output.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

EXPECTED_HEADER = [
    "run_id",
    "algo",
    "seed",
    "t",
    "samples",
    "theta_err_sq",
    "tracking_err_sq",
    "objective",
    "grad_norm_sq",
]

KINDS = ("trace", "floor-vs-M", "sweep")

_RC = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "font.size": 10,
    "font.family": "DejaVu Sans",
    "svg.hashsalt": "ttsa-plots",
    "svg.fonttype": "none",
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class SchemaError(ValueError):
    """Artifact does not match the published schema."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw and where to put it."""

    input_path: str | Path
    kind: str
    output_path: str | Path
    metric: str = "auto"  # trace column; auto = theta_err_sq else objective
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"figure kind must be one of {KINDS}, got {self.kind!r}")


def _read_trace(path: Path) -> dict:
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != EXPECTED_HEADER:
            missing = [c for c in EXPECTED_HEADER if c not in header]
            extra = [c for c in header if c not in EXPECTED_HEADER]
            offending = (missing + extra or ["<column order>"])[0]
            raise SchemaError(
                f"{path.name}: header does not match the trace schema "
                f"(offending column: {offending})"
            )
        rows = list(reader)
    cols: dict[str, list] = {name: [] for name in header}
    for row in rows:
        for name, cell in zip(header, row):
            cols[name].append(cell)

    def numeric(name):
        vals = cols[name]
        if any(v == "" for v in vals):
            return None  # metric not applicable to this algorithm
        try:
            return np.array([float(v) for v in vals])
        except ValueError as exc:
            raise SchemaError(f"{path.name}: non-numeric value in column {name}") from exc

    return {
        "seed": cols["seed"][0] if rows else "",
        "t": numeric("t") if rows else np.zeros(0),
        "theta_err_sq": numeric("theta_err_sq") if rows else None,
        "tracking_err_sq": numeric("tracking_err_sq") if rows else None,
        "objective": numeric("objective") if rows else None,
        "grad_norm_sq": numeric("grad_norm_sq") if rows else None,
    }


def _load_run_dir(path: Path) -> tuple[list[dict], dict]:
    traces = [_read_trace(p) for p in sorted(path.glob("run_*.csv"))]
    if not traces:
        raise SchemaError(f"no run_*.csv traces under {path}")
    summary = {}
    summary_path = path / "summary.json"
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
    return traces, summary


def _bound_curve(summary: dict, t: np.ndarray) -> np.ndarray | None:
    bound = summary.get("bound", {})
    run = summary.get("run_config", {})
    needed = ("contraction_rate", "delta0", "A1")
    if not all(k in bound for k in needed) or "batch_size" not in run:
        return None
    rate, delta0, a1 = (bound[k] for k in needed)
    return (1.0 - rate) ** t * delta0 + a1 / run["batch_size"]


def _render_trace(spec: FigureSpec, ax) -> None:
    traces, summary = _load_run_dir(Path(spec.input_path))
    metric = spec.metric
    if metric == "auto":
        metric = "theta_err_sq" if traces[0]["theta_err_sq"] is not None else "objective"
    curves = []
    for trace in traces:
        if trace[metric] is None:
            raise SchemaError(f"metric {metric} is empty in run_{trace['seed']}.csv")
        curves.append(trace[metric])
    t = traces[0]["t"]
    curves = np.asarray(curves)
    mean = curves.mean(axis=0)
    lo, hi = curves.min(axis=0), curves.max(axis=0)

    if len(t) == 1:
        ax.plot(t, mean, "o", color="C0", label=f"seed mean ({len(curves)} seeds)")
    else:
        ax.plot(t, mean, color="C0", label=f"seed mean ({len(curves)} seeds)")
        ax.fill_between(t, np.maximum(lo, 1e-300), hi, alpha=0.25, color="C0",
                        label="seed range")
    if metric == "theta_err_sq":
        bound = _bound_curve(summary, t)
        if bound is not None:
            gap = mean - bound
            if np.any(gap > 0):
                worst = int(np.argmax(gap))
                raise AssertionError(
                    f"bound overlay dips below the empirical mean at t={t[worst]}"
                )
            ax.plot(t, bound, "--", color="C3", label="evaluated bound")
    ax.set_yscale("log")
    ax.set_xlabel("iteration t")
    ax.set_ylabel(metric)
    ax.legend(loc="upper right")


def _render_floor(spec: FigureSpec, ax) -> None:
    root = Path(spec.input_path)
    points = []
    for summary_path in sorted(root.glob("**/summary.json")):
        doc = json.loads(summary_path.read_text())
        m = doc.get("run_config", {}).get("batch_size")
        err = doc.get("seed_mean", {}).get("final_theta_err_sq")
        if err is None:
            err = doc.get("seed_mean", {}).get("final_grad_norm_sq")
        if m is None or err is None:
            raise SchemaError(f"{summary_path}: summary lacks batch_size/final error")
        points.append((m, err))
    if not points:
        raise SchemaError(f"no summary.json files under {root}")
    points.sort()
    ms = np.array([p[0] for p in points], dtype=float)
    errs = np.array([p[1] for p in points], dtype=float)
    ax.loglog(ms, errs, "o-", color="C0", label="final error")
    ref = errs[0] * ms[0] / ms
    ax.loglog(ms, ref, "--", color="C2", label="1/M reference")
    ax.set_xlabel("batch size M")
    ax.set_ylabel("seed-averaged final error")
    ax.legend(loc="upper right")


def _render_sweep(spec: FigureSpec, ax) -> None:
    path = Path(spec.input_path)
    if path.is_dir():
        candidates = sorted(path.glob("sweep*.json"))
        if not candidates:
            raise SchemaError(f"no sweep*.json report under {path}")
        path = candidates[0]
    doc = json.loads(path.read_text())
    for key in ("eps", "tm", "slope", "intercept"):
        if key not in doc:
            raise SchemaError(f"{path.name}: sweep report lacks field {key}")
    inv_eps = 1.0 / np.asarray(doc["eps"], dtype=float)
    tm = np.asarray(doc["tm"], dtype=float)
    ax.loglog(inv_eps, tm, "o", color="C0", label="measured TM")
    grid = np.geomspace(inv_eps.min(), inv_eps.max(), 50)
    fitted = np.exp(doc["intercept"]) * grid ** doc["slope"]
    ax.loglog(grid, fitted, "--", color="C3",
              label=f"fit, slope {doc['slope']:.2f}")
    ax.set_xlabel("1 / eps")
    ax.set_ylabel("samples to accuracy (T M)")
    ax.legend(loc="upper left")


def render(spec: FigureSpec) -> Path:
    """Render the figure and return the output path."""
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            if spec.kind == "trace":
                _render_trace(spec, ax)
            elif spec.kind == "floor-vs-M":
                _render_floor(spec, ax)
            else:
                _render_sweep(spec, ax)
            if spec.title:
                ax.set_title(spec.title)
            fig.tight_layout()
            fig.savefig(out, format=out.suffix.lstrip(".") or "svg",
                        metadata=_strip_metadata(out))
        finally:
            plt.close(fig)
    return out


def _strip_metadata(out: Path) -> dict | None:
    suffix = out.suffix.lower()
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".png":
        return {"Software": None}
    return None
