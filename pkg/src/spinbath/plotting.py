"""Plot-data emission and figure rendering for CLI reports.

Every figure is emitted twice: as a JSON recipe holding the plotted
arrays and styling hints (so any plotting stack can regenerate it), and
as a rendered PNG for direct viewing.
"""

from __future__ import annotations

import json

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def write_recipe(path, recipe: dict) -> None:
    """Write a figure recipe as deterministic JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(recipe, fh, indent=2, sort_keys=True)
        fh.write("\n")


def scaling_recipe(rows, fits: dict | None = None) -> dict:
    """Recipe for the decay-time versus concentration figure."""
    series = []
    c = [row["concentration_ppm"] for row in rows]
    for key, ci_lo, ci_hi, label in (
            ("t2_star_s", "t2_star_ci_low_s", "t2_star_ci_high_s",
             "T2* (free induction)"),
            ("t2_s", "ci_low", "ci_high", "T2 (spin echo)")):
        series.append({
            "label": label,
            "x_ppm": c,
            "y_s": [row[key] for row in rows],
            "y_ci_low_s": [row.get(ci_lo, row[key]) for row in rows],
            "y_ci_high_s": [row.get(ci_hi, row[key]) for row in rows],
        })
    recipe = {"figure": "scaling", "x_label": "concentration (ppm)",
              "y_label": "decay time (s)", "x_scale": "log",
              "y_scale": "log", "series": series}
    if fits:
        recipe["fits"] = fits
    return recipe


def render_scaling_figure(recipe: dict, path) -> None:
    """Render the scaling recipe to a PNG."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    markers = ("o", "s")
    for series, marker in zip(recipe["series"], markers):
        x = np.asarray(series["x_ppm"])
        y = np.asarray(series["y_s"])
        lo = np.asarray(series["y_ci_low_s"])
        hi = np.asarray(series["y_ci_high_s"])
        yerr = np.vstack([np.clip(y - lo, 0, None), np.clip(hi - y, 0, None)])
        ax.errorbar(x, y, yerr=yerr, marker=marker, linestyle="none",
                    capsize=3, label=series["label"])
    for fit in (recipe.get("fits") or {}).values():
        if "x_ppm" in fit and "y_s" in fit:
            ax.plot(fit["x_ppm"], fit["y_s"], "--", linewidth=1,
                    label=fit.get("label", "fit"))
    ax.set_xscale(recipe.get("x_scale", "log"))
    ax.set_yscale(recipe.get("y_scale", "log"))
    ax.set_xlabel(recipe["x_label"])
    ax.set_ylabel(recipe["y_label"])
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def decay_recipe(curves, labels) -> dict:
    """Recipe for one or more decay curves (values plus references)."""
    series = []
    for curve, label in zip(curves, labels):
        entry = {"label": label, "t_s": curve.times.tolist(),
                 "value": curve.values.tolist(), "kind": curve.kind,
                 "sequence": curve.sequence.value}
        if curve.stderr is not None:
            entry["stderr"] = curve.stderr.tolist()
        if curve.reference is not None:
            entry["reference"] = curve.reference.tolist()
        series.append(entry)
    return {"figure": "decay", "x_label": "t (s)",
            "y_label": "p(bright)", "series": series}


def render_decay_figure(recipe: dict, path) -> None:
    """Render the decay recipe to a PNG."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for series in recipe["series"]:
        t = np.asarray(series["t_s"])
        v = np.asarray(series["value"])
        if "stderr" in series:
            ax.errorbar(t, v, yerr=series["stderr"], linestyle="none",
                        marker=".", markersize=3, label=series["label"])
        else:
            ax.plot(t, v, label=series["label"])
        if "reference" in series:
            ax.plot(t, np.asarray(series["reference"]), ":", linewidth=1,
                    label=series["label"] + " (closed form)")
    ax.set_xlabel(recipe["x_label"])
    ax.set_ylabel(recipe["y_label"])
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def distribution_recipe(stats, n_bins: int = 40) -> dict:
    """Recipe for the per-realization distribution histograms."""
    from .ensemble import pdf_delta, pdf_tau_c

    deltas = np.asarray(stats.delta_samples)
    taus = np.asarray(stats.tau_c_samples)
    taus = taus[np.isfinite(taus)]
    panels = []
    for name, samples, fitted in (
            ("delta_rad_s", deltas,
             lambda x: pdf_delta(x, stats.delta_ens)),
            ("tau_c_s", taus,
             lambda x: pdf_tau_c(x, stats.tau_c_ens, stats.lambda_shape))):
        med = float(np.median(samples))
        edges = np.geomspace(med / 30.0, med * 30.0, n_bins + 1)
        counts, _ = np.histogram(samples, bins=edges)
        dens = counts / (samples.size * np.diff(edges))
        centers = np.sqrt(edges[1:] * edges[:-1])
        panels.append({"name": name, "bin_centers": centers.tolist(),
                       "density": dens.tolist(),
                       "fit_density": [float(fitted(c)) for c in centers]})
    return {"figure": "distributions", "panels": panels,
            "delta_ens_rad_s": stats.delta_ens,
            "tau_c_ens_s": stats.tau_c_ens,
            "lambda_s": stats.lambda_shape}


def render_distribution_figure(recipe: dict, path) -> None:
    """Render the distribution recipe to a PNG."""
    panels = recipe["panels"]
    fig, axes = plt.subplots(1, len(panels), figsize=(4.5 * len(panels), 3.6))
    if len(panels) == 1:
        axes = [axes]
    for ax, panel in zip(axes, panels):
        centers = np.asarray(panel["bin_centers"])
        ax.step(centers, panel["density"], where="mid", label="samples")
        ax.plot(centers, panel["fit_density"], label="fitted density")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(panel["name"])
        ax.set_ylabel("density")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
