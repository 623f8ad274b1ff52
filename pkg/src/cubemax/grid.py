"""Grid functions, pixel sets, and exact perimeter / variation arithmetic.

Conventions used throughout the package:

* A grid function samples one real value per cell of a d-dimensional box,
  d in {1, 2, 3}, with cell width ``h``.  Values are stored flat, row-major.
* The domain is the *open* interior of the box (or of an explicit mask), so
  boundary faces against the outside of the domain are never counted.
* The discrete perimeter of a pixel set is the anisotropic face count: the
  number of unit faces separating an inside cell from an outside cell, both
  lying in the domain, times ``h**(d-1)``.  With this perimeter the coarea
  identity ``var f = sum over level gaps of gap * perimeter(superlevel)``
  holds exactly (up to float summation order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch, UnsupportedDimension


def _as_dims(dims: Sequence[int]) -> tuple[int, ...]:
    t = tuple(int(n) for n in dims)
    if not 1 <= len(t) <= 3:
        raise UnsupportedDimension(f"d={len(t)} not in {{1,2,3}}")
    if any(n <= 0 for n in t):
        raise ValueError(f"dims must be positive, got {t}")
    return t


@dataclass(frozen=True)
class GridFunction:
    """A real-valued function sampled on a d-dimensional cell grid."""

    dims: tuple[int, ...]
    h: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = _as_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "h", float(self.h))
        vals = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        if self.h <= 0:
            raise ValueError("cell width h must be positive")
        if vals.size != int(np.prod(dims)):
            raise ValueError(f"{vals.size} values for dims {dims}")
        if np.any(np.isinf(vals)):
            raise ValueError("grid values must be finite (NaN marks masked cells)")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def array(self) -> np.ndarray:
        """Values reshaped to the grid box (read-only view)."""
        return self.values.reshape(self.dims)

    @property
    def cell_count(self) -> int:
        return self.values.size

    def require_finite(self) -> "GridFunction":
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function contains non-finite values")
        return self


def grid_from_array(arr: np.ndarray, h: float = 1.0) -> GridFunction:
    arr = np.asarray(arr, dtype=np.float64)
    return GridFunction(arr.shape, h, arr.ravel())


@dataclass(frozen=True)
class PixelSet:
    """An exact subset of grid cells, stored as a boolean array."""

    dims: tuple[int, ...]
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = _as_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        m = np.ascontiguousarray(self.mask, dtype=bool).reshape(dims)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def empty(cls, dims: Sequence[int]) -> "PixelSet":
        dims = _as_dims(dims)
        return cls(dims, np.zeros(dims, dtype=bool))

    @classmethod
    def full(cls, dims: Sequence[int]) -> "PixelSet":
        dims = _as_dims(dims)
        return cls(dims, np.ones(dims, dtype=bool))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    def __or__(self, other: "PixelSet") -> "PixelSet":
        self._check(other)
        return PixelSet(self.dims, self.mask | other.mask)

    def __and__(self, other: "PixelSet") -> "PixelSet":
        self._check(other)
        return PixelSet(self.dims, self.mask & other.mask)

    def __sub__(self, other: "PixelSet") -> "PixelSet":
        self._check(other)
        return PixelSet(self.dims, self.mask & ~other.mask)

    def equals(self, other: "PixelSet") -> bool:
        self._check(other)
        return bool(np.array_equal(self.mask, other.mask))

    def subset_of(self, other: "PixelSet") -> bool:
        self._check(other)
        return not np.any(self.mask & ~other.mask)

    def _check(self, other: "PixelSet") -> None:
        if self.dims != other.dims:
            raise DimensionMismatch(f"{self.dims} vs {other.dims}")


class BoundaryMeasure(NamedTuple):
    """Exact face count of a discrete boundary and its (d-1)-measure."""

    face_count: int
    measure: float


def superlevel(f: GridFunction, lam: float) -> PixelSet:
    """Cells where ``f >= lam``.  Sentinel (NaN) cells always compare False."""
    return PixelSet(f.dims, f.array >= lam)


def _directed_face_count(src: np.ndarray, dst: np.ndarray) -> int:
    """Faces with a ``src`` cell on one side and an adjacent ``dst`` cell on the other."""
    total = 0
    for ax in range(src.ndim):
        a = np.moveaxis(src, ax, 0)
        b = np.moveaxis(dst, ax, 0)
        total += int(np.count_nonzero(a[:-1] & b[1:]))
        total += int(np.count_nonzero(a[1:] & b[:-1]))
    return total


def perimeter(E: PixelSet, mask: PixelSet | None = None, h: float = 1.0) -> BoundaryMeasure:
    """Discrete boundary measure of ``E`` inside the open domain.

    Counts faces between a cell in ``E & mask`` and an adjacent cell in
    ``mask - E``.  Without a mask the domain is the open grid box, so faces
    on the outer box boundary are not counted.
    """
    if mask is not None and mask.dims != E.dims:
        raise DimensionMismatch(f"{E.dims} vs {mask.dims}")
    dom = mask.mask if mask is not None else np.ones(E.dims, dtype=bool)
    inside = E.mask & dom
    outside = dom & ~E.mask
    faces = _directed_face_count(inside, outside)
    d = len(E.dims)
    return BoundaryMeasure(faces, faces * float(h) ** (d - 1))


def boundary_faces_outside(E: PixelSet, closed: PixelSet,
                           mask: PixelSet | None = None, h: float = 1.0) -> BoundaryMeasure:
    """Measure of ``boundary(E)`` minus the closure of ``closed``.

    A boundary face is the interface between an inside and an outside cell;
    it lies in the closure of a pixel set iff either adjacent cell belongs
    to the set, so surviving faces have both cells outside ``closed``.
    """
    dom = mask.mask if mask is not None else np.ones(E.dims, dtype=bool)
    inside = E.mask & dom & ~closed.mask
    outside = dom & ~E.mask & ~closed.mask
    faces = _directed_face_count(inside, outside)
    d = len(E.dims)
    return BoundaryMeasure(faces, faces * float(h) ** (d - 1))


def _flat_strides(dims: tuple[int, ...]) -> tuple[int, ...]:
    strides = [1] * len(dims)
    for ax in range(len(dims) - 2, -1, -1):
        strides[ax] = strides[ax + 1] * dims[ax + 1]
    return tuple(strides)


def variation(f: GridFunction, mask: PixelSet | None = None) -> float:
    """Total variation as the exact sum over threshold gaps.

    Computes ``sum (v_{i+1} - v_i) * perimeter(superlevel(f, v_{i+1}))`` over
    consecutive distinct cell values, maintaining the superlevel perimeter
    incrementally while cells drop out in ascending value order.  Only cells
    inside the mask contribute values or faces.
    """
    dims = f.dims
    active = mask.mask if mask is not None else np.ones(dims, dtype=bool)
    if mask is not None and mask.dims != dims:
        raise DimensionMismatch(f"{dims} vs {mask.dims}")
    flat_active = active.ravel()
    idx = np.flatnonzero(flat_active)
    if idx.size == 0:
        return 0.0
    vals = f.values[idx]
    if not np.all(np.isfinite(vals)):
        raise ValueError("variation requires finite values on the domain")
    order = np.argsort(vals, kind="stable")
    sorted_vals = vals[order]
    sorted_idx = idx[order]
    # group boundaries of equal values
    cut = np.flatnonzero(np.diff(sorted_vals)) + 1
    group_starts = np.concatenate(([0], cut))
    group_ends = np.concatenate((cut, [sorted_vals.size]))
    distinct = sorted_vals[group_starts]
    if distinct.size == 1:
        return 0.0

    strides = _flat_strides(dims)
    in_e = flat_active.copy()
    stamp = np.full(f.cell_count, -1, dtype=np.int64)
    per = 0  # face count of the current superlevel set
    hpow = float(f.h) ** (len(dims) - 1)
    total = 0.0
    n_groups = distinct.size
    for g in range(1, n_groups):
        drop = sorted_idx[group_starts[g - 1]:group_ends[g - 1]]
        stamp[drop] = g
        delta = 0
        for ax in range(len(dims)):
            s = strides[ax]
            coord = (drop // s) % dims[ax]
            for step, ok in ((s, coord < dims[ax] - 1), (-s, coord > 0)):
                nb = drop[ok] + step
                nb = nb[flat_active[nb]]
                nb = nb[stamp[nb] != g]
                if nb.size:
                    up = int(np.count_nonzero(in_e[nb]))
                    delta += up - (nb.size - up)
        in_e[drop] = False
        per += delta
        total += (distinct[g] - distinct[g - 1]) * per * hpow
    return total


def lambda_breakpoints(f: GridFunction, extra: Iterable[float] = ()) -> np.ndarray:
    """Sorted, deduplicated union of all cell values and the given extras.

    Every level-set quantity in the package is constant on each open interval
    between consecutive breakpoints, so integrals over the level parameter
    reduce to exact finite sums (see :func:`integrate_breakpoints`).
    """
    extra = np.asarray(list(extra), dtype=np.float64)
    vals = f.values[np.isfinite(f.values)]
    return np.unique(np.concatenate((vals, extra)))


def integrate_breakpoints(breakpoints: np.ndarray, values_at: np.ndarray,
                          lower: float | None = None) -> float:
    """Exact integral of a step function over the level parameter.

    ``values_at[i]`` is the integrand on the interval
    ``(breakpoints[i-1], breakpoints[i]]``; the integrand vanishes outside
    the breakpoint hull.  When ``lower`` is given, only intervals starting
    at or above it contribute (``lower`` must itself be a breakpoint).
    """
    b = np.asarray(breakpoints, dtype=np.float64)
    g = np.asarray(values_at, dtype=np.float64)
    if b.size != g.size:
        raise ValueError("breakpoints and values must align")
    if b.size < 2:
        return 0.0
    gaps = np.diff(b)
    contrib = gaps * g[1:]
    if lower is not None:
        contrib = contrib[b[:-1] >= lower]
    return float(np.sum(contrib))
