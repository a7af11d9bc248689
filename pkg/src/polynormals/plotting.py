"""Figures written next to the command-line reports (Agg backend, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .geometry import Polytope  # noqa: E402

INDEX_COLORS = {0: "tab:blue", 1: "tab:red", 2: "tab:green", 3: "tab:purple", 4: "tab:orange"}


def _polygon(P: Polytope) -> np.ndarray:
    c = P.centroid
    ang = np.arctan2(P.vertices[:, 1] - c[1], P.vertices[:, 0] - c[0])
    V = P.vertices[np.argsort(ang)]
    return np.vstack([V, V[:1]])


def plot_normals_2d(P: Polytope, y, records, path: str) -> None:
    """Polygon, the point y and a segment to every normal base."""
    if P.dim != 2:
        raise ValueError("normal figures are drawn for polygons only")
    y = np.asarray(y, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 5))
    ring = _polygon(P)
    ax.plot(ring[:, 0], ring[:, 1], color="black", lw=1.2)
    for r in records:
        ax.plot([y[0], r.base[0]], [y[1], r.base[1]], color=INDEX_COLORS.get(r.morse_index, "gray"),
                lw=1.0, ls="--" if r.marginal else "-")
        ax.plot(*r.base, "o", color=INDEX_COLORS.get(r.morse_index, "gray"), ms=4)
    ax.plot(*y, "k*", ms=9)
    ax.set_aspect("equal")
    ax.set_title(f"{len(records)} normals (blue: minima, red: maxima)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_scan(scan, path: str) -> None:
    """Normal count along a segment, with crossing intervals shaded."""
    t = [s[0] for s in scan.samples]
    c = [s[1] for s in scan.samples]
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.step(t, c, where="mid", color="tab:blue")
    for lo, hi, *_ in scan.crossings:
        ax.axvspan(lo, hi, color="tab:orange", alpha=0.4, lw=0)
    ax.set_xlabel("t")
    ax.set_ylabel("normals")
    ax.set_xlim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_verify_summary(reports, path: str) -> None:
    """Best count per polytope against the 2n+4 target."""
    fig, ax = plt.subplots(figsize=(max(4, 0.3 * len(reports) + 2), 3))
    x = np.arange(len(reports))
    best = [r.best_count for r in reports]
    target = [r.target for r in reports]
    ax.bar(x, best, color=["tab:green" if b >= t else "tab:red" for b, t in zip(best, target)])
    ax.step(np.r_[x - 0.5, x[-1] + 0.5], np.r_[target, target[-1]], where="post",
            color="black", lw=1)
    ax.set_xlabel("instance")
    ax.set_ylabel("best count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
