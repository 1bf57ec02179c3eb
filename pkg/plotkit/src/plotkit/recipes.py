"""Figure recipes: each kind consumes documented CSV schemas from the bandgap
CLI and renders a deterministic image.

No numerics are re-implemented here beyond axis transforms and straight-line
fits for slope annotations; the CLI artifacts are the single source of truth.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class RecipeError(Exception):
    """Invalid recipe or input schema."""


#: expected columns per input role, keyed by figure kind
SCHEMAS = {
    "band_gap_decay": {
        "gapband": ["branch", "beta", "omega_re", "omega_im"],
        "defect": ["omega", "beta_measured", "beta_predicted", "branch_alpha"],
    },
    "skin_modes": {
        "modes": ["mode_index", "cell_index", "position", "amplitude"],
        "skin": ["mode_index", "lambda", "omega_re", "omega_im", "slope",
                 "prediction", "relative_deviation", "is_kernel", "in_bulk_band"],
    },
    "sigma_min_map": {"scan": ["beta1", "beta2", "sigma_min"]},
    "amplitude_surface": {"floquet": ["alpha1", "alpha2", "amplitude"]},
    "phase_diagram": {
        "phase": ["omega", "beta_measured", "alpha_star_1", "alpha_star_2", "label"],
    },
    "convergence": {"convergence": ["method", "N", "value"]},
    "runtime": {"runtime": ["method", "N", "value"]},
}


@dataclass
class FigureRecipe:
    kind: str
    inputs: dict
    output: str
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "FigureRecipe":
        for key in ("kind", "inputs", "output"):
            if key not in data:
                raise RecipeError(f"recipe missing required key {key!r}")
        if data["kind"] not in SCHEMAS:
            raise RecipeError(f"unknown figure kind {data['kind']!r}")
        return cls(data["kind"], dict(data["inputs"]), data["output"],
                   dict(data.get("options", {})))


def load_table(path: str, columns: list[str]) -> dict:
    """Read a CSV and validate its header against the documented schema."""
    if not os.path.exists(path):
        raise RecipeError(f"input CSV not found: {path}")
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RecipeError(f"{path}: empty CSV") from None
        if header != columns:
            raise RecipeError(
                f"{path}: header {header} does not match schema {columns}")
        rows = [row for row in reader if row]
    if not rows:
        raise RecipeError(f"{path}: no data rows")
    table = {}
    for j, name in enumerate(columns):
        col = [row[j] for row in rows]
        try:
            table[name] = np.array([float(v) for v in col])
        except ValueError:
            table[name] = np.array(col)
    return table


def _loglog_slope(ns, values):
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def _save(fig, recipe: FigureRecipe):
    out = recipe.output
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    ext = os.path.splitext(out)[1].lower()
    metadata = {"Software": None} if ext == ".png" else {"Date": None}
    fig.savefig(out, dpi=recipe.options.get("dpi", 120), metadata=metadata)
    plt.close(fig)


def render(recipe: FigureRecipe) -> dict:
    """Render one figure; returns annotation values (fitted slopes etc.)."""
    tables = {}
    schema = SCHEMAS[recipe.kind]
    for role, columns in schema.items():
        if role not in recipe.inputs:
            raise RecipeError(f"recipe for {recipe.kind!r} needs input {role!r}")
        tables[role] = load_table(recipe.inputs[role], columns)
    return _RENDERERS[recipe.kind](recipe, tables)


def render_band_gap_decay(recipe, tables):
    gap = tables["gapband"]
    defect = tables["defect"]
    fig, ax = plt.subplots(figsize=(7, 5))
    for branch in sorted(set(gap["branch"])):
        sel = gap["branch"] == branch
        order = np.argsort(gap["beta"][sel])
        ax.plot(gap["beta"][sel][order], gap["omega_re"][sel][order],
                label=f"gap band {branch}", lw=1.4)
    ax.plot(defect["beta_measured"], defect["omega"], "x", color="tab:blue",
            ms=7, label="measured decay")
    ok = np.isfinite(defect["beta_predicted"])
    ax.plot(defect["beta_predicted"][ok], defect["omega"][ok], ".",
            color="tab:red", ms=5, label="best branch")
    ax.set_xlabel("decay rate beta")
    ax.set_ylabel("omega")
    ax.set_xlim(left=0.0)
    ax.legend(fontsize=8)
    _save(fig, recipe)
    return {"n_frequencies": int(len(defect["omega"]))}


def render_skin_modes(recipe, tables):
    modes = tables["modes"]
    skin = tables["skin"]
    fig, ax = plt.subplots(figsize=(7, 5))
    for j in sorted(set(int(v) for v in modes["mode_index"])):
        sel = modes["mode_index"] == j
        order = np.argsort(modes["position"][sel])
        ax.semilogy(modes["position"][sel][order],
                    np.maximum(modes["amplitude"][sel][order], 1e-18),
                    color="black", lw=0.5, alpha=0.45)
    pred = float(skin["prediction"][0])
    xs = np.array([modes["position"].min(), modes["position"].max()])
    ax.semilogy(xs, np.exp(pred * (xs - xs[0])), color="tab:red", lw=2.0,
                label=f"predicted decay {pred:.3f}")
    ax.set_xlabel("position")
    ax.set_ylabel("|mode|")
    ax.legend(fontsize=8)
    _save(fig, recipe)
    return {"prediction": pred}


def _surface(recipe, x, y, z, labels, log_z=False):
    xs = np.unique(x)
    ys = np.unique(y)
    grid = np.full((len(xs), len(ys)), np.nan)
    ix = np.searchsorted(xs, x)
    iy = np.searchsorted(ys, y)
    grid[ix, iy] = np.log10(np.maximum(z, 1e-300)) if log_z else z
    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.pcolormesh(xs, ys, grid.T, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=labels[2])
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    _save(fig, recipe)


def render_sigma_min_map(recipe, tables):
    scan = tables["scan"]
    _surface(recipe, scan["beta1"], scan["beta2"], scan["sigma_min"],
             ("beta_1", "beta_2", "log10 sigma_min"), log_z=True)
    return {"min_sigma": float(np.nanmin(scan["sigma_min"]))}


def render_amplitude_surface(recipe, tables):
    fl = tables["floquet"]
    _surface(recipe, fl["alpha1"], fl["alpha2"], fl["amplitude"],
             ("alpha_1", "alpha_2", "amplitude density"))
    i = int(np.argmax(fl["amplitude"]))
    return {"argmax": [float(fl["alpha1"][i]), float(fl["alpha2"][i])]}


def render_phase_diagram(recipe, tables):
    ph = tables["phase"]
    order = np.argsort(ph["omega"])
    colors = {"M": "tab:purple", "X": "tab:orange", "G": "tab:green"}
    fig, ax = plt.subplots(figsize=(7, 3))
    for label in ("M", "X", "G"):
        sel = ph["label"][order] == label
        ax.scatter(ph["omega"][order][sel], np.zeros(int(sel.sum())),
                   color=colors[label], marker="s", s=90, label=label)
    ax.set_yticks([])
    ax.set_xlabel("omega")
    ax.legend(loc="upper center", ncol=3, fontsize=8)
    transitions = [
        float(ph["omega"][order][k + 1])
        for k in range(len(order) - 1)
        if ph["label"][order][k] != ph["label"][order][k + 1]
    ]
    for t in transitions:
        ax.axvline(t, color="gray", lw=0.8, ls="--")
    _save(fig, recipe)
    return {"transitions": transitions}


def render_convergence(recipe, tables):
    conv = tables["convergence"]
    fig, ax = plt.subplots(figsize=(6.5, 5))
    slopes = {}
    for method in sorted(set(conv["method"])):
        sel = conv["method"] == method
        ns = conv["N"][sel]
        vals = conv["value"][sel]
        order = np.argsort(ns)
        slope = _loglog_slope(ns[order], np.maximum(vals[order], 1e-300))
        slopes[str(method)] = slope
        ax.loglog(ns[order], vals[order], "o-",
                  label=f"{method} (slope {slope:.2f})")
    ax.set_xlabel("lattice truncation N")
    ax.set_ylabel("max-entry error")
    ax.legend(fontsize=8)
    _save(fig, recipe)
    return {"slopes": slopes}


def render_runtime(recipe, tables):
    rt = tables["runtime"]
    fig, ax = plt.subplots(figsize=(6.5, 5))
    trends = {}
    for method in sorted(set(rt["method"])):
        sel = rt["method"] == method
        ns = rt["N"][sel]
        vals = rt["value"][sel]
        order = np.argsort(ns)
        design = np.vstack([ns[order] ** 2, np.ones(int(sel.sum()))]).T
        (a, c), *_ = np.linalg.lstsq(design, vals[order], rcond=None)
        trends[str(method)] = [float(a), float(c)]
        ax.plot(ns[order], vals[order], "o-", label=f"{method}")
        ax.plot(ns[order], a * ns[order] ** 2 + c, "--", lw=1.0,
                label=f"{method} trend a N^2 + c")
    ax.set_xlabel("lattice truncation N")
    ax.set_ylabel("seconds")
    ax.legend(fontsize=8)
    _save(fig, recipe)
    return {"trends": trends}


_RENDERERS = {
    "band_gap_decay": render_band_gap_decay,
    "skin_modes": render_skin_modes,
    "sigma_min_map": render_sigma_min_map,
    "amplitude_surface": render_amplitude_surface,
    "phase_diagram": render_phase_diagram,
    "convergence": render_convergence,
    "runtime": render_runtime,
}
