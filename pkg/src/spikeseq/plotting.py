"""Figure rendering for run reports. Everything is written straight to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .transforms import to_grayscale  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
}

# fixed metadata keeps PNG bytes stable across runs
_PNG_META = {"Software": None}


def _save(fig, path) -> None:
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def plot_loss_curve(losses, path, title: str = "Training loss") -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        epochs = np.arange(1, len(losses) + 1)
        ax.plot(epochs, losses, marker="o", markersize=2.5, linewidth=1.2)
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean cross-entropy")
        ax.set_title(title)
        ax.grid(alpha=0.3)
        _save(fig, path)


def plot_confusion(counts: np.ndarray, classes, path, title: str = "Confusion matrix") -> None:
    counts = np.asarray(counts)
    n = counts.shape[0]
    side = max(3.0, 0.45 * n + 1.5)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(side, side))
        im = ax.imshow(counts, cmap="Blues")
        ax.set_xticks(range(n), labels=list(classes), rotation=90)
        ax.set_yticks(range(n), labels=list(classes))
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        ax.set_title(title)
        if n <= 25:
            cutoff = counts.max() / 2.0 if counts.size else 0
            for i in range(n):
                for j in range(n):
                    ax.text(j, i, str(int(counts[i, j])), ha="center", va="center", fontsize=7,
                            color="white" if counts[i, j] > cutoff else "black")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        _save(fig, path)


def plot_repeat_metrics(reports, path, names=("accuracy", "f1_weighted", "f1_macro", "roc_auc_ovr")) -> None:
    """Grouped bars of selected metrics per repeat, with the mean as a dashed line."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.2))
        width = 0.8 / len(names)
        x = np.arange(len(reports))
        for k, name in enumerate(names):
            vals = np.array([getattr(r, name) for r in reports])
            bars = ax.bar(x + k * width, vals, width, label=name)
            ax.axhline(vals.mean(), color=bars.patches[0].get_facecolor(), linestyle="--", linewidth=0.8)
        ax.set_xticks(x + width * (len(names) - 1) / 2, labels=[f"repeat {i}" for i in x])
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("score")
        ax.legend(loc="lower right", ncol=2)
        ax.set_title("Per-repeat test metrics")
        _save(fig, path)


def save_matrix_image(matrix: np.ndarray, path) -> None:
    """Grayscale PNG of a transform matrix, min-max scaled to 0..255."""
    plt.imsave(path, to_grayscale(matrix), cmap="gray", vmin=0, vmax=255, metadata=_PNG_META)


def plot_transform(matrix: np.ndarray, path, title: str = "") -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 3.2))
        im = ax.imshow(matrix, cmap="viridis", origin="lower")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        _save(fig, path)
