"""Render experiment CSVs into static figures with machine-readable sidecars.

Every render writes ``<out>`` (PNG) plus ``<out>.meta.json`` describing the
axes, scales, and series so the figure pipeline is testable without image
diffing. Rendering is deterministic: a fixed style, no timestamps, and no
randomness, so re-rendering the same inputs is byte-identical.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("variance_vs_p", "traces", "landscape_heatmap",
                "mi_vs_depth", "collapse", "entropy_vs_p")

_SCHEMAS = {
    "variance_vs_p": ["ansatz", "n", "depth", "p", "variant", "grad_index",
                      "variance", "ci_low", "ci_high", "n_samples", "seed"],
    "traces": ["trace_id", "iter", "cost"],
    "landscape_heatmap": ["alpha", "beta", "cost"],
    "mi_vs_depth": ["ansatz", "n", "depth", "p", "estimator", "bits",
                    "stderr", "N_a", "N_b", "N_c", "seed"],
    "entropy_vs_p": ["ansatz", "n", "depth", "p", "mean_entropy_bits",
                     "ci_low", "ci_high", "n_samples", "seed"],
}
_SCHEMAS["collapse"] = _SCHEMAS["entropy_vs_p"]

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "axes.prop_cycle": plt.cycler(
        color=["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
               "#8c564b", "#17becf", "#7f7f7f"]),
}


class RenderError(Exception):
    pass


@dataclass
class FigureSpec:
    figure_kind: str
    inputs: list[str]
    output: str
    collapse_json: str | None = None     # collapse figure
    manifest: str | None = None          # traces figure (ground energy)
    options: dict = field(default_factory=dict)


def read_table(path: str, kind: str) -> dict[str, list[str]]:
    """Parse one CSV and validate it against the kind's schema."""
    schema = _SCHEMAS[kind]
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row]
    except OSError as exc:
        raise RenderError(f"cannot read {path}: {exc}")
    if not rows:
        raise RenderError(f"{path} is empty")
    header = rows[0]
    for col in schema:
        if col not in header:
            raise RenderError(f"{path} is missing column {col!r}")
    if len(rows) < 2:
        raise RenderError(f"{path} has a header but no data rows")
    idx = {col: header.index(col) for col in header}
    return {col: [row[idx[col]] for row in rows[1:]] for col in header}


def _floats(col):
    return np.array([float(v) if v != "" else np.nan for v in col])


def _series_by_n(table):
    ns = sorted({int(v) for v in table["n"]})
    n_col = np.array([int(v) for v in table["n"]])
    return ns, n_col


def _finish(fig, ax, spec, meta):
    ax.set_xlabel(meta["x_label"])
    ax.set_ylabel(meta["y_label"])
    if meta["series_count"] > 1 and meta.get("legend", True):
        ax.legend(fontsize=8)
    fig.tight_layout()
    meta["x_range"] = [float(v) for v in ax.get_xlim()]
    meta["y_range"] = [float(v) for v in ax.get_ylim()]
    meta["x_scale"] = ax.get_xscale()
    meta["y_scale"] = ax.get_yscale()
    meta.pop("legend", None)
    fig.savefig(spec.output, metadata={"Software": "monivqa-figures"})
    plt.close(fig)
    with open(spec.output + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return spec.output


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the image path."""
    if spec.figure_kind not in FIGURE_KINDS:
        raise RenderError(f"unknown figure kind {spec.figure_kind!r}")
    if not spec.inputs:
        raise RenderError("no input CSV given")
    with plt.rc_context(_STYLE):
        return _RENDERERS[spec.figure_kind](spec)


def _render_variance(spec: FigureSpec) -> str:
    table = read_table(spec.inputs[0], "variance_vs_p")
    ns, n_col = _series_by_n(table)
    p = _floats(table["p"])
    var = _floats(table["variance"])
    lo, hi = _floats(table["ci_low"]), _floats(table["ci_high"])
    fig, ax = plt.subplots()
    for n in ns:
        sel = n_col == n
        order = np.argsort(p[sel])
        ax.errorbar(p[sel][order], var[sel][order],
                    yerr=[(var - lo)[sel][order], (hi - var)[sel][order]],
                    marker="o", ms=3, lw=1, capsize=2, label=f"N={n}")
    ax.set_yscale("log")
    meta = {"kind": "variance_vs_p", "series_count": len(ns),
            "x_label": "measurement probability p",
            "y_label": "Var of gradient component", "dashed_lines": []}
    return _finish(fig, ax, spec, meta)


def _render_traces(spec: FigureSpec) -> str:
    table = read_table(spec.inputs[0], "traces")
    tid = np.array([int(v) for v in table["trace_id"]])
    it = np.array([int(v) for v in table["iter"]])
    cost = _floats(table["cost"])
    fig, ax = plt.subplots()
    ids = sorted(set(tid.tolist()))
    for t in ids:
        sel = tid == t
        order = np.argsort(it[sel])
        ax.plot(it[sel][order], cost[sel][order], lw=1)
    dashed = []
    manifest = spec.manifest
    if manifest is None:
        candidate = os.path.join(os.path.dirname(spec.inputs[0]),
                                 "manifest.json")
        manifest = candidate if os.path.exists(candidate) else None
    if manifest:
        try:
            with open(manifest) as fh:
                doc = json.load(fh)
            energy = doc.get("extras", {}).get("exact_ground_energy")
        except (OSError, json.JSONDecodeError) as exc:
            raise RenderError(f"cannot read manifest {manifest}: {exc}")
        if energy is not None:
            ax.axhline(energy, ls="--", color="black", lw=1)
            dashed.append(float(energy))
    meta = {"kind": "traces", "series_count": len(ids),
            "x_label": "iteration", "y_label": "cost",
            "dashed_lines": dashed, "legend": False}
    return _finish(fig, ax, spec, meta)


def _render_landscape(spec: FigureSpec) -> str:
    table = read_table(spec.inputs[0], "landscape_heatmap")
    alpha = _floats(table["alpha"])
    beta = _floats(table["beta"])
    cost = _floats(table["cost"])
    a_vals = np.unique(alpha)
    b_vals = np.unique(beta)
    grid = np.full((a_vals.size, b_vals.size), np.nan)
    ai = np.searchsorted(a_vals, alpha)
    bi = np.searchsorted(b_vals, beta)
    grid[ai, bi] = cost
    fig, ax = plt.subplots()
    im = ax.pcolormesh(b_vals, a_vals, grid, shading="nearest",
                       cmap="viridis")
    fig.colorbar(im, ax=ax, label="cost")
    meta = {"kind": "landscape_heatmap", "series_count": 1,
            "x_label": "beta", "y_label": "alpha",
            "missing_cells": int(np.isnan(grid).sum()),
            "dashed_lines": [], "legend": False}
    return _finish(fig, ax, spec, meta)


def _render_mi(spec: FigureSpec) -> str:
    table = read_table(spec.inputs[0], "mi_vs_depth")
    ns, n_col = _series_by_n(table)
    depth = np.array([int(v) for v in table["depth"]])
    bits = _floats(table["bits"])
    err = _floats(table["stderr"])
    fig, ax = plt.subplots()
    for n in ns:
        sel = n_col == n
        order = np.argsort(depth[sel])
        ax.errorbar(depth[sel][order], bits[sel][order], yerr=err[sel][order],
                    marker="o", ms=3, lw=1, capsize=2, label=f"N={n}")
    ax.set_yscale("log")
    meta = {"kind": "mi_vs_depth", "series_count": len(ns),
            "x_label": "circuit depth", "y_label": "I(A,B) [bits]",
            "dashed_lines": []}
    return _finish(fig, ax, spec, meta)


def _render_entropy(spec: FigureSpec) -> str:
    table = read_table(spec.inputs[0], "entropy_vs_p")
    ns, n_col = _series_by_n(table)
    p = _floats(table["p"])
    s = _floats(table["mean_entropy_bits"])
    lo, hi = _floats(table["ci_low"]), _floats(table["ci_high"])
    fig, ax = plt.subplots()
    for n in ns:
        sel = n_col == n
        order = np.argsort(p[sel])
        ax.errorbar(p[sel][order], s[sel][order],
                    yerr=[(s - lo)[sel][order], (hi - s)[sel][order]],
                    marker="o", ms=3, lw=1, capsize=2, label=f"N={n}")
    meta = {"kind": "entropy_vs_p", "series_count": len(ns),
            "x_label": "measurement probability p",
            "y_label": "half-chain entropy [bits]", "dashed_lines": []}
    return _finish(fig, ax, spec, meta)


def _render_collapse(spec: FigureSpec) -> str:
    if not spec.collapse_json:
        raise RenderError("collapse figure needs --collapse-json")
    table = read_table(spec.inputs[0], "collapse")
    try:
        with open(spec.collapse_json) as fh:
            fit = json.load(fh)
        p_c, nu = float(fit["p_c"]), float(fit["nu"])
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise RenderError(f"cannot read collapse fit: {exc}")
    ns, n_col = _series_by_n(table)
    p = _floats(table["p"])
    s = _floats(table["mean_entropy_bits"])
    fig, ax = plt.subplots()
    for n in ns:
        sel = n_col == n
        order = np.argsort(p[sel])
        pn, sn = p[sel][order], s[sel][order]
        s_pc = np.interp(p_c, pn, sn)
        x = (pn - p_c) * n ** (1.0 / nu)
        ax.plot(x, sn - s_pc, marker="o", ms=3, lw=1, label=f"N={n}")
    ax.axvline(0.0, ls="--", color="black", lw=1)
    meta = {"kind": "collapse", "series_count": len(ns),
            "x_label": f"(p - p_c) N^(1/nu), p_c={p_c:.3f}, nu={nu:.2f}",
            "y_label": "S(p,N) - S(p_c,N)", "dashed_lines": [0.0],
            "fit": {"p_c": p_c, "nu": nu}}
    return _finish(fig, ax, spec, meta)


_RENDERERS = {
    "variance_vs_p": _render_variance,
    "traces": _render_traces,
    "landscape_heatmap": _render_landscape,
    "mi_vs_depth": _render_mi,
    "entropy_vs_p": _render_entropy,
    "collapse": _render_collapse,
}
