"""Matplotlib figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from noisecnn import noise  # noqa: E402

AXIS_LABELS = {
    noise.LINEAR: "slope a (amplitude units / sample)",
    noise.AWGN: "sigma (amplitude units)",
}
STYLES = {"CNN": "-", "SEPCNN": "--"}
MARKERS = {"NONE": "o", "GMM": "s", "OVERSAMPLE": "^"}
# drop the timestamp/version so reruns produce identical files
_PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_curves(results, config, path) -> Path:
    """One panel per noise kind: F1 (%) against strength for every classifier/augmentation pair."""
    from noisecnn.experiment.report import curve_rows

    kinds = list(config.noise)
    fig, axes = plt.subplots(1, len(kinds), figsize=(5.5 * len(kinds), 4), sharey=True, squeeze=False)
    rows = curve_rows(results, config)
    for ax, kind in zip(axes[0], kinds):
        for clf in config.classifiers:
            for aug in config.augmentations:
                pts = [(float(s), float(f)) for c, a, k, s, f in rows if (c, a, k) == (clf, aug, kind) and f]
                if not pts:
                    continue
                xs, ys = zip(*pts)
                ax.plot(xs, ys, STYLES.get(clf, "-"), marker=MARKERS.get(aug, "o"), label=f"{clf} / {aug}")
        ax.set_title(kind)
        ax.set_xlabel(AXIS_LABELS.get(kind, "strength"))
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("test F1 (%)")
    axes[0][-1].legend(fontsize=8)
    return _save(fig, path)


def plot_preview(record, specs, path, x_scale: float = 1.0) -> Path:
    """Clean record with each noisy variant; linear ramps on the left, Gaussian noise on the right."""
    groups = [(noise.LINEAR, [s for s in specs if s.kind == noise.LINEAR]),
              (noise.AWGN, [s for s in specs if s.kind == noise.AWGN])]
    groups = [g for g in groups if g[1]] or [("clean", [])]
    fig, axes = plt.subplots(1, len(groups), figsize=(6 * len(groups), 4), squeeze=False)
    t = np.arange(record.samples.size)
    for ax, (kind, members) in zip(axes[0], groups):
        for s in reversed(members):
            ax.plot(t, noise.apply_noise(record.samples, s, x_scale=x_scale), lw=0.7, label=s.label)
        ax.plot(t, record.samples, "k", lw=0.9, label="clean")
        ax.set_title(f"{record.id} ({kind})")
        ax.set_xlabel("sample index")
        ax.legend(fontsize=7)
    axes[0][0].set_ylabel("amplitude")
    return _save(fig, path)
