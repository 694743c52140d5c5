"""SVG figure rendering for experiment reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def line_chart(path: Path, series: dict[str, tuple], xlabel: str, ylabel: str,
               title: str = "", logx: bool = False, logy: bool = False) -> None:
    """Error-bar line chart; series maps label -> (x, y) or (x, y, yerr)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label, data in series.items():
        xs, ys = data[0], data[1]
        errs = data[2] if len(data) > 2 else None
        ax.errorbar(xs, ys, yerr=errs, marker="o", markersize=3.5,
                    capsize=2.5, linewidth=1.0, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    if len(series) > 1:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format=path.suffix.lstrip(".") or "svg")
    plt.close(fig)


def decay_fit_chart(path: Path, radii, values, exponent: float, title: str = "") -> None:
    """Log-log decay plot with the fitted power law overlaid."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.loglog(radii, values, "o", markersize=4, label="measured")
    if radii and exponent is not None:
        anchor = values[0] * radii[0] ** exponent
        fit = [anchor * r ** (-exponent) for r in radii]
        ax.loglog(radii, fit, "--", linewidth=1.0,
                  label=f"fit: r^(-{exponent:.3f})")
    ax.set_xlabel("r")
    ax.set_ylabel("S2(r)")
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
