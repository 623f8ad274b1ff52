"""File formats: grid CSV and binary, family JSON, canonical report JSON,
and gnuplot-ready plot data."""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .cubes import CubeFamily, GridCube
from .grid import GridFunction

MAGIC = b"CUBEMAX1"


def write_grid_csv(f: GridFunction, path) -> None:
    """One row per grid line (d = 1 or 2); the cell width rides in a comment."""
    if f.d > 2:
        raise ValueError("CSV grids support d <= 2; use the binary format")
    arr = f.array if f.d == 2 else f.array.reshape(1, -1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# h={f.h!r}\n")
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_grid_csv(path) -> GridFunction:
    h = 1.0
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "h=" in line:
                    h = float(line.split("h=", 1)[1])
                continue
            rows.append([float(x) for x in line.split(",")])
    arr = np.array(rows, dtype=np.float64)
    if arr.shape[0] == 1:
        return GridFunction((arr.shape[1],), h, arr.ravel())
    return GridFunction(arr.shape, h, arr.ravel())


def write_grid_binary(f: GridFunction, path) -> None:
    """Little-endian: magic, u32 d, u32 dims[d], f64 h, f64 values."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", f.d))
        fh.write(struct.pack(f"<{f.d}I", *f.dims))
        fh.write(struct.pack("<d", f.h))
        fh.write(f.values.astype("<f8").tobytes())


def read_grid_binary(path) -> GridFunction:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError("bad magic; not a cubemax grid file")
    off = 8
    (d,) = struct.unpack_from("<I", raw, off)
    off += 4
    dims = struct.unpack_from(f"<{d}I", raw, off)
    off += 4 * d
    (h,) = struct.unpack_from("<d", raw, off)
    off += 8
    n = int(np.prod(dims))
    values = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
    return GridFunction(dims, h, values.copy())


def family_to_json(fam: CubeFamily, dims, h: float) -> dict:
    return {
        "dims": list(dims),
        "h": h,
        "cubes": [{"anchor": list(c.anchor), "side": c.side} for c in fam.cubes],
    }


def family_from_json(obj: dict) -> tuple[CubeFamily, tuple[int, ...], float]:
    cubes = [GridCube(tuple(c["anchor"]), c["side"]) for c in obj["cubes"]]
    return CubeFamily(cubes), tuple(obj["dims"]), float(obj["h"])


def _fmt_float(x: float) -> str:
    if x != x:
        return "NaN"
    if x == float("inf"):
        return "Infinity"
    if x == float("-inf"):
        return "-Infinity"
    return format(x, ".17g")


def canonical_json(obj: Any, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k in sorted(obj, key=str):
            items.append(f'{pad}  "{k}": {canonical_json(obj[k], indent + 2).lstrip()}')
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {canonical_json(v, indent + 2).lstrip()}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return canonical_json(obj.tolist(), indent)
    raise TypeError(f"cannot serialize {type(obj)}")


def write_report(report: dict, out_dir, name: str = "report.json") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(canonical_json(report) + "\n", encoding="utf-8")
    return path


def write_table_csv(path, header: list[str], columns) -> None:
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt_float(float(v)) if isinstance(v, (float, np.floating))
                              else str(v) for v in row) + "\n")


def write_plot_columns(path, columns, comment: str = "") -> None:
    """Whitespace-separated numeric columns for gnuplot."""
    cols = [np.asarray(c, dtype=np.float64) for c in columns]
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for row in zip(*cols):
            fh.write(" ".join(_fmt_float(float(v)) for v in row) + "\n")


def read_plot_columns(path) -> list[np.ndarray]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(x) for x in line.split()])
    arr = np.array(rows, dtype=np.float64)
    return [arr[:, k] for k in range(arr.shape[1])] if arr.size else []
