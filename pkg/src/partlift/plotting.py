"""Matplotlib panels for rendered frames and pose sweeps."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .imageio import feature_rgb  # noqa: E402

RC = {
    "font.size": 8,
    "axes.titlesize": 8,
    "axes.labelsize": 8,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "image.interpolation": "nearest",
    "svg.hashsalt": "partlift",
}


def _label_cmap(K):
    base = plt.get_cmap("tab20")
    return matplotlib.colors.ListedColormap([base(k % 20) for k in range(max(K, 1))])


def _bare(ax, title):
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])


def frame_panel(frame, part_names, path, feature_vis="first3"):
    """Feature projection, label map, opacity and mask of the first active part."""
    K = frame.mask.shape[-1]
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 3, figsize=(7.5, 2.7))
        axes[0].imshow(feature_rgb(frame.feature, feature_vis))
        _bare(axes[0], f"feature ({feature_vis})")
        im = axes[1].imshow(frame.labels, cmap=_label_cmap(K), vmin=-0.5, vmax=K - 0.5)
        _bare(axes[1], f"labels ({frame.mask_mode.value} weights)")
        cb = fig.colorbar(im, ax=axes[1], ticks=range(K), fraction=0.046, pad=0.04)
        cb.ax.set_yticklabels(part_names, fontsize=5)
        im = axes[2].imshow(frame.opacity, cmap="magma", vmin=0.0, vmax=1.0)
        _bare(axes[2], "opacity (sum of weights)")
        fig.colorbar(im, ax=axes[2], fraction=0.046, pad=0.04)
        fig.suptitle(f"yaw={frame.pose.yaw:.4f}  pitch={frame.pose.pitch:.4f}")
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)


def sweep_panel(frames, path, feature_vis="first3"):
    """Two rows per sweep: feature projections above, label maps below."""
    n = len(frames)
    K = frames[0].mask.shape[-1]
    cmap = _label_cmap(K)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(2, n, figsize=(1.3 * n, 2.8), squeeze=False)
        for i, fr in enumerate(frames):
            axes[0, i].imshow(feature_rgb(fr.feature, feature_vis))
            _bare(axes[0, i], f"{np.degrees(fr.pose.yaw - np.pi / 2):+.1f}°")
            axes[1, i].imshow(fr.labels, cmap=cmap, vmin=-0.5, vmax=K - 0.5)
            _bare(axes[1, i], "")
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
