"""Report figures written straight to image files (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .genmodel import DistanceHistogram, PowerLawParams  # noqa: E402

PathLike = Union[str, Path]


def plot_aad(curves: dict, path: PathLike) -> None:
    """ACC@m against m, one line per named curve of ``(m, acc)`` pairs."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, curve in curves.items():
        m, acc = zip(*curve)
        ax.plot(m, acc, marker="o", ms=3, label=name)
    ax.set_xscale("symlog", linthresh=10)
    ax.set_xlabel("distance m (miles)")
    ax.set_ylabel("ACC@m")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_power_law(fits: Sequence, path: PathLike, hist: Optional[DistanceHistogram] = None,
                   labels: Optional[Sequence] = None) -> None:
    """Follow probability against distance on log-log axes.

    ``fits`` is a sequence of :class:`PowerLawParams`; ``hist`` adds the
    empirical per-bucket ratios as points.
    """
    fig, ax = plt.subplots(figsize=(5, 3.5))
    d = np.logspace(0, 3.5, 100)
    if hist is not None:
        b, pairs, follows = hist.arrays()
        ok = (pairs > 0) & (follows > 0)
        ax.scatter(b[ok], follows[ok] / pairs[ok], s=8, color="0.5", label="observed")
    labels = labels or [f"round {i}" for i in range(len(fits))]
    for p, name in zip(fits, labels):
        p = p if isinstance(p, PowerLawParams) else PowerLawParams(*p)
        ax.plot(d, p.prob(d), label=f"{name}: a={p.alpha:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("distance (miles)")
    ax.set_ylabel("follow probability")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_trace(values: Sequence, path: PathLike, ylabel: str = "ACC@100") -> None:
    """Per-sweep metric trace."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(np.arange(1, len(values) + 1), values, marker=".")
    ax.set_xlabel("sweep")
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
