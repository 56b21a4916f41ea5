"""Render convergence curves and probe scatters from experiment outputs.

Figures are drawn purely from the harness's trace CSVs and manifest JSON;
nothing is recomputed, so rerendering the same inputs plots the same data.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

LOG_FLOOR = 1e-16

_GROUP_KEYS = ("d", "kappa", "lambda", "outlier_fraction", "method")


@dataclass(frozen=True)
class FigureSpec:
    manifest: str
    group_by: str                      # one of _GROUP_KEYS
    y: str = "rel_error"               # "rel_error" | "loss"
    out: str = "figure.png"
    title: str | None = None
    xlabel: str = "iteration"
    ylabel: str | None = None
    where: dict = field(default_factory=dict)   # e.g. {"method": "opsa"}

    def __post_init__(self):
        if self.group_by not in _GROUP_KEYS:
            raise ValueError(f"group_by must be one of {_GROUP_KEYS}")
        if self.y not in ("rel_error", "loss"):
            raise ValueError("y must be 'rel_error' or 'loss'")


@dataclass(frozen=True)
class RenderResult:
    out: str
    curves: tuple            # (label, n_points) per plotted curve

    @property
    def total_points(self) -> int:
        return sum(n for _, n in self.curves)


def read_trace(path) -> dict:
    """Load one trace CSV into column arrays (floats; blanks dropped)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"empty trace CSV: {path}")
    cols = {}
    for name in rows[0]:
        values = [row[name] for row in rows]
        cols[name] = [float(v) for v in values if v != ""]
    return cols


def _matches(cell: dict, where: dict) -> bool:
    for key, want in where.items():
        have = cell.get(key)
        try:
            if float(have) != float(want):
                return False
        except (TypeError, ValueError):
            if str(have) != str(want):
                return False
    return True


def render_convergence(spec: FigureSpec) -> RenderResult:
    """One log-scale curve per selected cell, labeled by its group value."""
    manifest_path = Path(spec.manifest)
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    cells = [c for c in manifest["cells"]
             if c.get("status") == "ok" and _matches(c, spec.where)]
    if not cells:
        raise ValueError("no cells match the figure selection")
    known = {c.get(spec.group_by) for c in manifest["cells"]}
    if None in known:
        raise ValueError(f"group key {spec.group_by!r} missing from manifest")

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    curves = []
    for cell in sorted(cells, key=lambda c: (str(c[spec.group_by]), c["file"])):
        cols = read_trace(base / cell["file"])
        y = [max(v, LOG_FLOOR) for v in cols[spec.y]]
        label = f"{spec.group_by}={cell[spec.group_by]:g}" \
            if isinstance(cell[spec.group_by], float) \
            else f"{spec.group_by}={cell[spec.group_by]}"
        ax.semilogy(cols["iter"], y, label=label, linewidth=1.4)
        curves.append((label, len(y)))
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel or spec.y.replace("_", " "))
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, which="both", alpha=0.25)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out)
    plt.close(fig)
    return RenderResult(out=str(spec.out), curves=tuple(curves))


def render_rip_scatter(csv_path, out_path) -> RenderResult:
    """Scatter of per-trial ratios with dashed lines at the observed extremes."""
    cols = read_trace(csv_path)
    trials, ratios = cols["trial"], cols["ratio"]
    if not ratios:
        raise ValueError(f"no ratios in {csv_path}")
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.scatter(trials, ratios, s=9, alpha=0.7)
    lo, hi = min(ratios), max(ratios)
    ax.axhline(lo, color="tab:blue", linestyle="--", linewidth=1.2,
               label=f"lower bound {lo:.4f}")
    ax.axhline(hi, color="tab:red", linestyle="--", linewidth=1.2,
               label=f"upper bound {hi:.4f}")
    ax.set_xlabel("trial")
    ax.set_ylabel("measurement l1 / Frobenius ratio")
    ax.grid(True, alpha=0.25)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return RenderResult(out=str(out_path), curves=(("ratios", len(ratios)),))
