"""CSV and run-metadata export, plus loading of saved profiles."""

import csv
import json
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from nicholson import ConfigError, GridError
from nicholson.profile import ALIGN_TOL, GridSpec, Profile

logger = logging.getLogger("nicholson.output")


def _fmt(value) -> str:
    return format(float(value), ".17g")


def write_csv(path: Path, columns: dict[str, Sequence[float]]) -> Path:
    """Write equal-length columns with a header row; floats at 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise ValueError(f"columns of unequal length for {path.name}: {sorted(lengths)}")

    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*arrays):
            writer.writerow([_fmt(v) for v in row])
    logger.debug("wrote %s (%d rows)", path, len(arrays[0]) if arrays else 0)
    return path


def write_profile_csv(path: Path, p: Profile) -> Path:
    return write_csv(path, {"t": p.spec.nodes, "value": p.values})


def read_csv(path: Path) -> dict[str, np.ndarray]:
    """Read a file written by write_csv; ConfigError on any defect."""
    path = Path(path)
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e}") from e
    if len(rows) < 3:
        raise ConfigError(f"{path} has no data rows")
    header, body = rows[0], rows[1:]
    data = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: {e}") from e
    table = np.array(data)
    if not np.all(np.isfinite(table)):
        raise ConfigError(f"{path} contains non-finite values")
    return {name: table[:, j] for j, name in enumerate(header)}


def read_profile_csv(path: Path, left_rate: float, right_limit: float,
                     column: str = "value") -> Profile:
    """Rebuild a Profile from a t,value CSV on a uniform grid."""
    cols = read_csv(path)
    if "t" not in cols or column not in cols:
        raise ConfigError(f"{path} needs columns 't' and '{column}', has {list(cols)}")
    t = cols["t"]
    steps = np.diff(t)
    h = float(t[-1] - t[0]) / (len(t) - 1)
    if h <= 0 or np.max(np.abs(steps - h)) > ALIGN_TOL * max(1.0, abs(t[-1] - t[0])):
        raise ConfigError(f"{path} is not on a uniform increasing grid")
    try:
        spec = GridSpec(float(t[0]), float(t[-1]), h)
        return Profile(spec, cols[column], left_rate, right_limit)
    except GridError as e:
        raise ConfigError(f"{path}: {e}") from e


def write_metadata(path: Path, meta: dict) -> Path:
    """JSON with sorted keys; contains no timestamps so reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(_plain(meta), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value
