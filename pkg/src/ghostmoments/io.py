"""CSV and JSON file formats. All writes go through a temporary file and a rename."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from ghostmoments.errors import InputError
from ghostmoments.kk import PhaseProfile, TransmissionPair
from ghostmoments.profiles import STEP_RTOL, Grid, SampledProfile


def fmt(v: float) -> str:
    return "%.17g" % v


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    atomic_write_text(path, dumps_json(obj))


def table_csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else (fmt(v) if isinstance(v, float) else str(v)) for v in row))
    return "\n".join(lines) + "\n"


def profile_csv(x: np.ndarray, *columns: np.ndarray, header: list[str] | None = None) -> str:
    rows = zip(x.tolist(), *(c.tolist() for c in columns))
    lines = [",".join(header)] if header else []
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_profile_csv(path, p: SampledProfile | PhaseProfile, header: bool = True) -> None:
    atomic_write_text(path, profile_csv(p.x, p.values, header=["x", "value"] if header else None))


def _read_table(path, ncols: tuple[int, ...]) -> np.ndarray:
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            try:
                values = [float(f) for f in fields]
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                raise InputError(f"{path}:{lineno}: non-numeric field in {fields!r}") from None
            if width is None:
                width = len(values)
                if width not in ncols:
                    raise InputError(f"{path}:{lineno}: expected {' or '.join(map(str, ncols))} columns, got {width}")
            elif len(values) != width:
                raise InputError(f"{path}:{lineno}: expected {width} columns, got {len(values)}")
            if not all(math.isfinite(v) for v in values):
                raise InputError(f"{path}:{lineno}: non-finite value")
            rows.append(values)
    if len(rows) < 2:
        raise InputError(f"{path}: need at least 2 data rows")
    return np.array(rows)


def grid_from_points(x: np.ndarray, source: str = "input") -> Grid:
    grid = Grid(float(x[0]), float(x[-1]), len(x))
    steps = np.diff(x)
    dev = np.max(np.abs(steps - grid.step)) / grid.step
    if dev > STEP_RTOL:
        k = int(np.argmax(np.abs(steps - grid.step)))
        raise InputError(f"{source}: grid is not uniform (relative step deviation {dev:.3g} at row {k + 2})")
    return grid


def read_profile_csv(path, kind: str = "density") -> SampledProfile:
    table = _read_table(path, (2,))
    grid = grid_from_points(table[:, 0], str(path))
    try:
        return SampledProfile(grid, table[:, 1], kind)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def read_transmission_csv(path) -> TransmissionPair | SampledProfile:
    """Three columns (w, F_eta, F_ref) give a pair; two columns (w, eta) give eta alone."""
    table = _read_table(path, (2, 3))
    grid = grid_from_points(table[:, 0], str(path))
    try:
        if table.shape[1] == 2:
            return SampledProfile(grid, table[:, 1])
        return TransmissionPair(SampledProfile(grid, table[:, 1]), SampledProfile(grid, table[:, 2]))
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None
