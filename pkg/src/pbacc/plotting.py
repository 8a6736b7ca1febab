"""Static SVG charts mirroring the experiment tables. CSV stays canonical."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    # Dropping the date metadata keeps repeated invocations byte-identical.
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_rme_by_stragglers(series: dict, levels, title: str, path: str) -> None:
    """One log-scale line per scheme: median RME against straggler count."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, values in sorted(series.items()):
        ax.plot(levels, values, marker="o", label=label)
    ax.set_yscale("log")
    ax.set_xlabel("stragglers")
    ax.set_ylabel("median RME")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_leakage_curves(rows, path: str) -> None:
    """Leakage bound against colluder count, one line per noise level."""
    by_sigma = {}
    for c, sigma_n, bits, _ in rows:
        by_sigma.setdefault(sigma_n, []).append((c, bits))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for sigma_n, points in sorted(by_sigma.items()):
        points.sort()
        ax.plot(
            [c for c, _ in points],
            [bits for _, bits in points],
            label=f"sigma_n = {sigma_n:g}",
        )
    ax.set_xlabel("colluding nodes c")
    ax.set_ylabel("leakage bound (bits)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
