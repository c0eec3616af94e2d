"""Render harness CSV reports into figures.

Consumes only the CSV interface of the estimation toolkit: one suite per
file, header row first, RFC-4180 quoting.  Each figure kind validates the
header against its required columns before any file is written; a
mismatch raises :class:`SchemaError` listing the expected header.
Rendering is deterministic: no randomness, fixed figure metadata.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["FigureSpec", "SchemaError", "FIGURE_KINDS", "REQUIRED_COLUMNS", "render"]


class SchemaError(ValueError):
    """The input CSV does not match the suite's header schema."""


REQUIRED_COLUMNS = {
    "variance_curve": ("p", "trials", "var_plain", "var_plain_analytic", "var_commcs"),
    "bias_hist": ("mode", "z"),
    "bon_curve": ("scorer", "n", "success_rate"),
    "ablation_bars": ("setting", "label_mae_refined"),
}
FIGURE_KINDS = tuple(REQUIRED_COLUMNS)

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": "commcs-plots"}}


@dataclass(frozen=True)
class FigureSpec:
    inputs: tuple[str, ...]
    kind: str
    output: str
    title: Optional[str] = None
    xlabel: Optional[str] = None
    ylabel: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}"
            )
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def _load_rows(path: str, kind: str) -> list[dict]:
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.DictReader(handle)
            header = reader.fieldnames or []
            required = REQUIRED_COLUMNS[kind]
            missing = [col for col in required if col not in header]
            if missing:
                raise SchemaError(
                    f"{path}: missing columns {missing}; a {kind} input requires "
                    f"the header columns {list(required)}"
                )
            rows = list(reader)
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaError(
            f"{path}: no data rows; a {kind} input requires at least one row "
            f"under the header columns {list(REQUIRED_COLUMNS[kind])}"
        )
    return rows


def _finish(fig, ax, spec: FigureSpec, default_title, default_x, default_y) -> None:
    ax.set_title(spec.title or default_title)
    ax.set_xlabel(spec.xlabel or default_x)
    ax.set_ylabel(spec.ylabel or default_y)
    fig.tight_layout()
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(out, **_SAVE_KWARGS)
    finally:
        plt.close(fig)


def _mean_by(rows, keys, value):
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(float(row[value]))
    return {k: sum(v) / len(v) for k, v in groups.items()}


def _variance_curve(rows, spec: FigureSpec) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    trial_counts = sorted({int(r["trials"]) for r in rows}, reverse=True)
    for trials in trial_counts:
        cells = sorted(
            (float(r["p"]), float(r["var_plain"])) for r in rows
            if int(r["trials"]) == trials
        )
        ax.plot(*zip(*cells), marker="o", label=f"plain N={trials}")
    base = min(trial_counts)
    analytic = sorted(
        (float(r["p"]), float(r["var_plain_analytic"])) for r in rows
        if int(r["trials"]) == base
    )
    ax.plot(*zip(*analytic), linestyle="--", color="gray", label=f"p(1-p)/{base}")
    compound = sorted(
        (float(r["p"]), float(r["var_commcs"])) for r in rows
        if int(r["trials"]) == base
    )
    ax.plot(*zip(*compound), marker="s", label=f"compound N={base}")
    ax.legend(fontsize=8)
    _finish(fig, ax, spec, "Estimation variance vs ground-truth value", "V(s)", "variance")


def _bias_hist(rows, spec: FigureSpec) -> None:
    zs = [float(r["z"]) for r in rows if r["mode"] == "dynamic"] or [
        float(r["z"]) for r in rows
    ]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(zs, bins=21, color="steelblue", edgecolor="white")
    for bound in (-4.0, 4.0):
        ax.axvline(bound, color="firebrick", linestyle="--")
    _finish(fig, ax, spec, "Standardized bias of refined labels", "z = (mean - V) / SE", "states")


def _bon_curve(rows, spec: FigureSpec) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    by_scorer_n = _mean_by(rows, ("scorer", "n"), "success_rate")
    scorers = sorted({k[0] for k in by_scorer_n})
    scorers.sort(key=lambda s: s != "oracle")  # oracle first in the legend
    for scorer in scorers:
        points = sorted(
            (int(n), rate) for (s, n), rate in by_scorer_n.items() if s == scorer
        )
        ax.plot(*zip(*points), marker="o", label=scorer)
    ax.set_xscale("log", base=2)
    ax.set_ylim(0.0, 1.05)
    ax.legend(fontsize=8)
    _finish(fig, ax, spec, "Best-of-N success rate", "N", "success rate")


def _ablation_bars(rows, spec: FigureSpec) -> None:
    means = _mean_by(rows, ("setting",), "label_mae_refined")
    settings = sorted(key for (key,) in means)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(settings)), [means[(s,)] for s in settings], color="steelblue")
    ax.set_xticks(range(len(settings)))
    ax.set_xticklabels(settings, rotation=20, ha="right", fontsize=8)
    _finish(fig, ax, spec, "Label error by coefficient setting", "setting", "label MAE")


_RENDERERS = {
    "variance_curve": _variance_curve,
    "bias_hist": _bias_hist,
    "bon_curve": _bon_curve,
    "ablation_bars": _ablation_bars,
}


def render(spec: FigureSpec) -> Path:
    """Validate the inputs and write the figure; returns the output path.

    Raises :class:`SchemaError` (and writes nothing) when any input is
    missing required columns or has no data rows.
    """
    rows: list[dict] = []
    for path in spec.inputs:
        rows.extend(_load_rows(path, spec.kind))
    _RENDERERS[spec.kind](rows, spec)
    return Path(spec.output)
