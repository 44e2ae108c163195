"""Report emission: full-precision CSV, JSON, and rendered figures.

All numeric cells are written with 17 significant digits so round-trips are
exact; non-finite energies appear as the explicit sentinel ``INF`` (NaN is
never emitted).  Files are written atomically (temp file + rename) so a
crashed run never leaves a half-written table.  Figures are rendered with the
Agg backend to PNG files living next to the delimited output.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def format_value(v) -> str:
    """Render one CSV cell: %.17g floats, INF sentinel, plain ints/strings."""
    if v is None:
        return "INF"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            raise ValueError("refusing to write NaN to a report")
        if math.isinf(f):
            return "INF" if f > 0 else "-INF"
        return "%.17g" % f
    return str(v)


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> Path:
    """Write a CSV table atomically; returns the path."""
    path = Path(path)
    lines = [",".join(str(h) for h in header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def write_json(path, obj) -> Path:
    """Write a JSON document atomically with sorted keys."""
    path = Path(path)
    _atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def csv_body(path) -> str:
    """The CSV content without the header line (for determinism checks)."""
    text = Path(path).read_text(encoding="utf-8")
    return text.split("\n", 1)[1] if "\n" in text else ""


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------


def _finish(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def figure_loglog_decay(path, eps_values, series: dict, title: str) -> Path:
    """Log-log decay plot of one or more positive series against eps."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    e = np.asarray(eps_values, dtype=float)
    plotted = 0
    for label, vals in series.items():
        v = np.asarray(vals, dtype=float)
        keep = v > 0
        if keep.any():
            ax.loglog(e[keep], v[keep], "o-", label=label)
            plotted += 1
    ax.set_xlabel("eps")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    if plotted:
        ax.legend(fontsize=8)
    else:
        ax.text(
            0.5,
            0.5,
            "all series identically zero",
            ha="center",
            va="center",
            transform=ax.transAxes,
        )
    fig.tight_layout()
    return _finish(fig, path)


def figure_energy_terms(path, labels, reports, title: str) -> Path:
    """Stacked bars of elastic / second-gradient / surface terms per field."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    idx = np.arange(len(labels))
    elastic = [r.elastic for r in reports]
    second = [r.second_gradient for r in reports]
    surface = [r.surface for r in reports]
    ax.bar(idx, elastic, label="elastic")
    ax.bar(idx, second, bottom=elastic, label="second gradient")
    ax.bar(
        idx,
        surface,
        bottom=[a + b for a, b in zip(elastic, second)],
        label="surface",
    )
    ax.set_xticks(idx)
    ax.set_xticklabels([str(l) for l in labels], rotation=30, fontsize=7, ha="right")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)


def figure_candidate_energies(path, energies, best_index: int, title: str) -> Path:
    """Energy of every crack candidate with the winner highlighted."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    idx = np.arange(len(energies))
    finite = [e if math.isfinite(e) else np.nan for e in energies]
    ax.plot(idx, finite, "o", label="candidates")
    if 0 <= best_index < len(energies):
        ax.plot([best_index], [finite[best_index]], "r*", markersize=14, label="best")
    ax.set_xlabel("candidate index")
    ax.set_ylabel("energy")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)
