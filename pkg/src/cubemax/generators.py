"""Seeded generators for test functions, pixel sets, and cube families."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .cubes import CubeFamily, GridCube, dyadic_completion, dyadic_descendants
from .grid import GridFunction, PixelSet

FUNCTION_CLASSES = ("indicator", "simple", "block-decreasing", "radial",
                    "random-smooth", "spikes")
FAMILY_CLASSES = ("all-cubes", "dyadic", "random-complete")


def _random_box_mask(rng: np.random.Generator, dims, k: int) -> np.ndarray:
    m = np.zeros(tuple(dims), dtype=bool)
    for _ in range(k):
        sl = []
        for n in dims:
            a = int(rng.integers(0, n))
            b = int(rng.integers(a + 1, n + 1))
            sl.append(slice(a, b))
        m[tuple(sl)] = True
    return m


def indicator_function(rng: np.random.Generator, dims, h: float, boxes: int = 3) -> GridFunction:
    while True:
        m = _random_box_mask(rng, dims, boxes)
        if 0 < m.sum() < m.size:
            return GridFunction(dims, h, m.astype(np.float64).ravel())


def simple_function(rng: np.random.Generator, dims, h: float, terms: int = 4) -> GridFunction:
    levels = np.array([0.5, 1.0, 1.5, 2.0, 3.0])
    while True:
        vals = np.zeros(tuple(dims))
        for _ in range(terms):
            m = _random_box_mask(rng, dims, 1)
            vals[m] += float(rng.choice(levels))
        if np.unique(vals).size > 1:
            return GridFunction(dims, h, vals.ravel())


def block_decreasing_function(rng: np.random.Generator, dims, h: float) -> GridFunction:
    """Nonincreasing in the distance from a center cell along every axis."""
    centers = [int(rng.integers(0, n)) for n in dims]
    profiles = []
    for n, c in zip(dims, centers):
        reach = max(abs(c), abs(n - 1 - c)) + 1
        p = np.sort(rng.random(reach))[::-1]
        idx = np.abs(np.arange(n) - c)
        profiles.append(p[idx])
    vals = profiles[0]
    for p in profiles[1:]:
        vals = np.multiply.outer(vals, p)
    return GridFunction(dims, h, vals.ravel())


def radial_function(rng: np.random.Generator, dims, h: float, steps: int = 6) -> GridFunction:
    center = np.array([rng.uniform(0, n) for n in dims])
    grids = np.meshgrid(*[np.arange(n) + 0.5 for n in dims], indexing="ij")
    r = np.sqrt(sum((g - c) ** 2 for g, c in zip(grids, center))) * h
    edges = np.sort(rng.uniform(0, float(r.max()) + 1e-9, steps))
    heights = np.sort(rng.random(steps + 1))[::-1]
    vals = heights[np.searchsorted(edges, r)]
    return GridFunction(dims, h, vals.ravel())


def random_smooth_function(rng: np.random.Generator, dims, h: float,
                           sigma: float = 2.0) -> GridFunction:
    noise = rng.standard_normal(tuple(dims))
    vals = gaussian_filter(noise, sigma=sigma, mode="nearest")
    vals = vals - vals.min()
    return GridFunction(dims, h, vals.ravel())


def spikes_function(rng: np.random.Generator, dims, h: float,
                    count: int = 4) -> GridFunction:
    """A few isolated hot cells: big cubes around them have tiny superlevel
    density, which is what feeds the low-density machinery."""
    vals = np.zeros(tuple(dims))
    n = int(np.prod(dims))
    hot = rng.choice(n, size=min(count, n), replace=False)
    vals.ravel()[hot] = rng.integers(1, 9, size=hot.size).astype(np.float64)
    return GridFunction(dims, h, vals.ravel())


def make_function(rng: np.random.Generator, cls: str, dims, h: float) -> GridFunction:
    if cls == "indicator":
        return indicator_function(rng, dims, h)
    if cls == "simple":
        return simple_function(rng, dims, h)
    if cls == "block-decreasing":
        return block_decreasing_function(rng, dims, h)
    if cls == "radial":
        return radial_function(rng, dims, h)
    if cls == "random-smooth":
        return random_smooth_function(rng, dims, h)
    if cls == "spikes":
        return spikes_function(rng, dims, h)
    raise ValueError(f"unknown function class {cls!r}")


def random_pixelset(rng: np.random.Generator, dims, density: float = 0.4) -> PixelSet:
    return PixelSet(tuple(dims), rng.random(tuple(dims)) < density)


def random_family(rng: np.random.Generator, dims, count: int,
                  pow2: bool = True) -> CubeFamily:
    """Random cubes inside the box; power-of-two sides by default."""
    cubes = []
    nmin = min(dims)
    for _ in range(count):
        if pow2:
            kmax = int(np.log2(nmin))
            side = 2 ** int(rng.integers(0, kmax + 1))
        else:
            side = int(rng.integers(1, nmin + 1))
        anchor = tuple(int(rng.integers(0, n - side + 1)) for n in dims)
        cubes.append(GridCube(anchor, side))
    return CubeFamily(cubes)


def random_complete_family(rng: np.random.Generator, dims, seeds: int) -> CubeFamily:
    """Completion of random seed cubes.

    When the box itself is a power-of-two cube it joins the seeds half of the
    time, so the completion usually grows real ancestor chains instead of
    staying an antichain.
    """
    fam = random_family(rng, dims, seeds, pow2=True)
    side = min(dims)
    cubes = list(fam.cubes)
    if not (side & (side - 1)) and max(dims) == side and rng.random() < 0.5:
        cubes.append(GridCube((0,) * len(dims), side))
    return dyadic_completion(CubeFamily(cubes))


def make_family(rng: np.random.Generator, cls: str, dims, seeds: int = 6) -> CubeFamily | None:
    if cls == "all-cubes":
        return None
    if cls == "dyadic":
        side = min(dims)
        if side & (side - 1):
            raise ValueError("dyadic family needs a power-of-two box")
        return dyadic_descendants(GridCube((0,) * len(dims), side))
    if cls == "random-complete":
        return random_complete_family(rng, dims, seeds)
    raise ValueError(f"unknown family class {cls!r}")
