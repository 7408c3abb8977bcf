"""Static SVG line plots of report series."""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

log = logging.getLogger(__name__)

LOG_SCALE_SERIES = ("newton_residual",)


def plot_series(name, xs, ys, path, logy=False, xlabel="", ylabel=""):
    """Write one SVG line plot; returns the path or None for an empty series."""
    if xs is None or ys is None or len(ys) == 0:
        log.warning("series %s is empty; no plot written", name)
        return None
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(xs, ys, marker="." if len(ys) < 40 else None)
    if logy:
        ax.set_yscale("log")
    ax.set_title(name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    # fixed hash salt keeps the SVG byte-stable
    plt.rcParams["svg.hashsalt"] = "affleg"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def emit_plots(report, directory):
    """One SVG per series in ``report["series"]``; returns the written paths."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create plot directory {directory}: {exc}") from exc
    written = []
    for name, series in sorted(report.get("series", {}).items()):
        xs, ys = series.get("x"), series.get("y")
        out = plot_series(name, xs, ys, directory / f"{name}.svg",
                          logy=any(name.startswith(p) for p in LOG_SCALE_SERIES),
                          xlabel=series.get("xlabel", ""), ylabel=series.get("ylabel", ""))
        if out is not None:
            written.append(out)
    return written
