"""CSV, JSON-manifest and SVG writers shared by every subcommand.

Outputs are text formats only and are byte-stable across reruns: floats use a
fixed format, JSON keys are sorted and SVG ids are salted deterministically.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
from collections.abc import Iterable, Sequence
from importlib import metadata
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.figure import Figure

from config import settings

logger = logging.getLogger(__name__)


def _format_cell(value) -> str:
    if isinstance(value, bool | np.bool_):
        return "true" if value else "false"
    if isinstance(value, int | np.integer):
        return str(int(value))
    if isinstance(value, float | np.floating):
        return format(float(value), settings.CSV_FLOAT_FORMAT)
    if isinstance(value, complex | np.complexfloating):
        value = complex(value)
        return (
            f"{format(value.real, settings.CSV_FLOAT_FORMAT)}"
            f"{'+' if value.imag >= 0 else '-'}"
            f"{format(abs(value.imag), settings.CSV_FLOAT_FORMAT)}j"
        )
    return str(value)


def csv_write(path: Path, *, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])
    logger.debug("wrote %s", path)
    return path


def csv_read(path: Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        return header, [row for row in reader if row]


def package_version() -> str:
    try:
        return metadata.version("latticeq")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def config_digest(config: dict) -> str:
    payload = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(payload).hexdigest()


def manifest_write(path: Path, *, config: dict, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": config,
        "config_sha256": config_digest(config),
        "code_version": package_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        **(extra or {}),
    }
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2, default=str) + "\n")
    return path


def svg_plot(
    path: Path,
    *,
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    xlabel: str,
    ylabel: str,
    title: str = "",
    logx: bool = False,
    logy: bool = False,
    styles: Sequence[str] | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with mpl.rc_context({"svg.hashsalt": settings.SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig = Figure(figsize=(6.0, 4.0))
        ax = fig.add_subplot()
        for idx, (label, xs, ys) in enumerate(series):
            style = styles[idx] if styles else "-"
            ax.plot(np.asarray(xs), np.asarray(ys), style, label=label)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path
