"""Summed-area tables for O(2^d) box sums and averages."""

from __future__ import annotations

import numpy as np


def _compensated_cumsum(a: np.ndarray, axis: int) -> np.ndarray:
    """Neumaier-compensated running sums along one axis."""
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    s = np.array(a[0], dtype=np.float64, copy=True)
    c = np.zeros_like(s)
    out[0] = s
    for i in range(1, a.shape[0]):
        x = a[i]
        t = s + x
        swap = np.abs(s) >= np.abs(x)
        c = c + np.where(swap, (s - t) + x, (x - t) + s)
        s = t
        out[i] = s + c
    return np.moveaxis(out, 0, axis)


class SummedAreaTable:
    """Prefix-sum table over a d-dimensional cell array.

    Integer inputs keep exact integer sums; float inputs are accumulated with
    compensated summation.  All query paths share one corner-accumulation
    order, so a scalar query and the corresponding slice of a vectorized
    query are bit-identical.
    """

    def __init__(self, array: np.ndarray):
        arr = np.asarray(array)
        self.dims = arr.shape
        self.d = arr.ndim
        if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
            table = np.zeros(tuple(n + 1 for n in arr.shape), dtype=np.int64)
            table[(slice(1, None),) * self.d] = arr
            for ax in range(self.d):
                np.cumsum(table, axis=ax, out=table)
        else:
            table = np.zeros(tuple(n + 1 for n in arr.shape), dtype=np.float64)
            core = arr.astype(np.float64, copy=True)
            for ax in range(self.d):
                core = _compensated_cumsum(core, ax)
            table[(slice(1, None),) * self.d] = core
        self.table = table
        # corner order is fixed: ascending bitmask over axes
        self._corners = []
        for bits in range(2 ** self.d):
            ones = bin(bits).count("1")
            sign = 1 if (self.d - ones) % 2 == 0 else -1
            self._corners.append((sign, bits))

    def box_sum(self, anchor, side: int):
        """Sum over the cube with the given anchor (cell coords) and side."""
        acc = None
        for sign, bits in self._corners:
            ix = tuple(a + side if (bits >> k) & 1 else a
                       for k, a in enumerate(anchor))
            term = self.table[ix]
            acc = sign * term if acc is None else acc + sign * term
        return acc

    def box_sum_grid(self, side: int) -> np.ndarray:
        """Sums for every anchor of a side-``side`` cube, shape dims - side + 1."""
        acc = None
        for sign, bits in self._corners:
            sl = tuple(slice(side, None) if (bits >> k) & 1 else slice(0, n + 1 - side)
                       for k, n in enumerate(self.dims))
            term = self.table[sl]
            acc = sign * term if acc is None else acc + sign * term
        return acc

    def box_sum_many(self, anchors: np.ndarray, side: int) -> np.ndarray:
        """Sums for an (n, d) array of anchors of equal-side cubes."""
        anchors = np.asarray(anchors, dtype=np.int64).reshape(-1, self.d)
        acc = None
        for sign, bits in self._corners:
            ix = tuple(anchors[:, k] + (side if (bits >> k) & 1 else 0)
                       for k in range(self.d))
            term = self.table[ix]
            acc = sign * term if acc is None else acc + sign * term
        return acc

    def box_avg(self, anchor, side: int) -> float:
        return self.box_sum(anchor, side) / float(side ** self.d)

    def box_avg_grid(self, side: int) -> np.ndarray:
        return self.box_sum_grid(side) / float(side ** self.d)

    def box_avg_many(self, anchors: np.ndarray, side: int) -> np.ndarray:
        return self.box_sum_many(anchors, side) / float(side ** self.d)
