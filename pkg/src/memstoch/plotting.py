"""Figures written next to the CSV reports.

All functions take plain rows (as produced by the harness or read back from
the CSV files) and save a PNG; nothing is shown interactively.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 9,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_training_curves(runs: Mapping[str, Sequence[dict]], path) -> Path:
    """Training error per epoch for each run, final test accuracy in the legend."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, rows in runs.items():
            ep = [r["epoch"] for r in rows]
            err = [r["train_error"] for r in rows]
            acc = rows[-1]["max_test_acc"] if rows else float("nan")
            ax.plot(ep, err, marker="o", ms=3, label=f"{label} (test {acc:.2f}%)")
        ax.set_xlabel("epoch")
        ax.set_ylabel("training error (%)")
        ax.set_yscale("log")
        ax.legend()
        return _save(fig, path)


def plot_sigma_sweep(rows: Sequence[dict], path, baseline: float | None = None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        rows = sorted(rows, key=lambda r: r["sigma_ratio"])
        ax.plot([r["sigma_ratio"] for r in rows], [r["max_test_acc"] for r in rows],
                marker="s", color="C3", label="memristive, stochastic")
        if baseline is not None:
            ax.axhline(baseline, ls="--", color="0.4", label="float baseline")
        ax.set_xlabel(r"programming variability $\sigma/B$")
        ax.set_ylabel("max test accuracy (%)")
        ax.legend()
        return _save(fig, path)


def plot_noise_study(rows: Sequence[dict], path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        keys = sorted({(r["model"], int(r["bl_infer"])) for r in rows})
        for model, bl in keys:
            sel = sorted((r for r in rows if r["model"] == model and int(r["bl_infer"]) == bl),
                         key=lambda r: r["sigma_i_sq"])
            label = "float baseline" if model == "float" else f"stochastic BL={bl}"
            ax.plot([r["sigma_i_sq"] for r in sel], [r["accuracy"] for r in sel],
                    marker="o", label=label)
        ax.set_xlabel(r"input noise variance $\sigma_i^2$")
        ax.set_ylabel("test accuracy (%)")
        ax.legend()
        return _save(fig, path)


def plot_digits(images: Sequence[np.ndarray], titles: Sequence[str], path) -> Path:
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(images), figsize=(1.4 * len(images), 1.6))
        for ax, img, title in zip(np.atleast_1d(axes), images, titles):
            ax.imshow(np.asarray(img).reshape(28, 28), cmap="gray", vmin=0, vmax=1)
            ax.set_title(title, fontsize=8)
            ax.axis("off")
        return _save(fig, path)
