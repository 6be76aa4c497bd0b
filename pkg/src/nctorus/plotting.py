"""PNG figures for experiment outputs.  Everything here is optional decoration over the CSVs."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def line_plot(path: str, x, ys: dict, xlabel: str, ylabel: str, title: str = "",
              logx: bool = False, logy: bool = False) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in ys.items():
        ax.plot(x, y, marker="o" if len(x) < 40 else None, ms=3, label=label)
    if logx:
        ax.set_xscale("log", base=2)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(ys) > 1:
        ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def cesaro_plot(out_dir: str, result) -> str:
    Ns = [c.N for c in result.checkpoints]
    ys = {"upper norm": [max(c.upper, 1e-300) for c in result.checkpoints],
          "GNS norm": [max(c.gns_norm, 1e-300) for c in result.checkpoints]}
    if all(c.limit_dev is not None for c in result.checkpoints):
        ys["distance to limit"] = [max(c.limit_dev, 1e-300) for c in result.checkpoints]
    return line_plot(os.path.join(out_dir, "cesaro.png"), Ns, ys, "N", "norm", "weighted means",
                     logx=True, logy=True)


def density_plot(out_dir: str, angles: np.ndarray, dens: np.ndarray) -> str:
    return line_plot(os.path.join(out_dir, "density.png"), angles, {"density": dens},
                     "angle", "density", "Fejer-smoothed spectral density")


def gaps_plot(out_dir: str, report) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    for n, r in sorted(report.per_n.items()):
        ax.plot(r.Ks, r.gaps, marker="o", ms=3, label=f"n={n}")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("K")
    ax.set_ylabel("smallest singular value")
    ax.legend(fontsize=7, ncol=2)
    ax.grid(alpha=0.3)
    return _save(fig, os.path.join(out_dir, "gaps.png"))


def oscillation_plot(out_dir: str, Ns, runs: dict) -> str:
    """``runs`` maps a label to an array of shape (len(Ns), points)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, vals in runs.items():
        ax.plot(Ns, np.max(np.abs(vals - vals[-1]), axis=1), marker="o", ms=3, label=label)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("N")
    ax.set_ylabel("max |M(N) - M(N_max)| over points")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, os.path.join(out_dir, "oscillation.png"))
