import numpy as np
import pytest

from cubemax import CubeFamily, GridCube, PixelSet, grid_from_array, lambda_breakpoints
from cubemax.partition import (
    boundary_decomposition_terms,
    boundary_of_union_check,
    decomposition_lhs,
    high_density_ratio,
    partition_at,
)


def random_instance(rng, dims=(10, 10), n_cubes=7, levels=5):
    f = grid_from_array(rng.integers(0, levels, tuple(dims)).astype(float))
    cubes = []
    for _ in range(n_cubes):
        side = int(rng.integers(1, min(dims)))
        anchor = tuple(int(rng.integers(0, n - side + 1)) for n in dims)
        cubes.append(GridCube(anchor, side))
    return f, CubeFamily(cubes).with_averages(f)


def classify_by_direct_volumes(f, fam, lam):
    """Oracle: recompute every class membership with per-cell loops."""
    d = f.d
    thresh = 2 ** (d + 1)
    level = f.array >= lam
    sel = [(c, a) for c, a in zip(fam.cubes, fam.averages) if a >= lam]
    q0 = []
    for c, a in sel:
        cnt = int(level[c.slices()].sum())
        if cnt * thresh >= c.cell_count:
            q0.append(c)
    u0 = np.zeros(f.dims, dtype=bool)
    for c in q0:
        u0[c.slices()] = True
    q1, q2 = [], []
    for c, a in sel:
        if c in q0:
            continue
        cnt = int(u0[c.slices()].sum())
        (q1 if cnt * thresh >= c.cell_count else q2).append(c)
    return set(q0), set(q1), set(q2)


class TestPartitionAt:
    def test_indicator_inside_is_high_density(self):
        vals = np.zeros((6, 6))
        vals[1:4, 1:4] = 1.0
        f = grid_from_array(vals)
        q = GridCube((1, 1), 3)
        p = partition_at(f, CubeFamily([q]).with_averages(f), 1.0)
        assert p.q0.cubes == (q,)
        assert p.sizes == (1, 0, 0)

    def test_low_density_isolated_cube_is_q2(self):
        # a big cube whose average is lifted by one far-away hot cell
        vals = np.zeros((8, 8))
        vals[0, 0] = 64.0
        f = grid_from_array(vals)
        big = GridCube((0, 0), 8)
        p = partition_at(f, CubeFamily([big]).with_averages(f), 0.5)
        # density of {f >= 0.5} in the cube: 1/64 < 1/8
        assert p.q2.cubes == (big,)

    @pytest.mark.parametrize("dims", [(24,), (10, 10), (6, 6, 6)])
    def test_classes_match_direct_volume_oracle(self, rng, dims):
        for _ in range(10):
            f, fam = random_instance(rng, dims=dims)
            for lam in lambda_breakpoints(f, fam.averages)[:: max(1, 3)]:
                p = partition_at(f, fam, float(lam))
                w0, w1, w2 = classify_by_direct_volumes(f, fam, float(lam))
                assert set(p.q0.cubes) == w0
                assert set(p.q1.cubes) == w1
                assert set(p.q2.cubes) == w2


class TestBoundaryDecomposition:
    def test_empty_q2_second_term_zero(self):
        vals = np.zeros((6, 6))
        vals[2:4, 2:4] = 1.0
        f = grid_from_array(vals)
        fam = CubeFamily([GridCube((2, 2), 2)]).with_averages(f)
        p = partition_at(f, fam, 1.0)
        t1, t2 = boundary_decomposition_terms(p, f)
        assert t2 == 0.0

    def test_empty_q01_first_term_zero(self):
        vals = np.zeros((8, 8))
        vals[0, 0] = 64.0
        f = grid_from_array(vals)
        fam = CubeFamily([GridCube((0, 0), 8)]).with_averages(f)
        p = partition_at(f, fam, 0.5)
        t1, t2 = boundary_decomposition_terms(p, f)
        assert t1 == 0.0

    def test_split_dominates_exactly(self, rng):
        for _ in range(20):
            f, fam = random_instance(rng, dims=(9, 9))
            for lam in lambda_breakpoints(f, fam.averages):
                p = partition_at(f, fam, float(lam))
                t1, t2 = boundary_decomposition_terms(p, f)
                lhs = decomposition_lhs(p, f)
                assert lhs <= t1 + t2 + 1e-12


class TestBoundaryOfUnion:
    def test_empty_b(self, rng):
        A = PixelSet((6, 6), rng.random((6, 6)) < 0.5)
        ok, witness = boundary_of_union_check(A, PixelSet.empty((6, 6)))
        assert ok and witness is None

    def test_a_subset_b(self, rng):
        B = PixelSet((6, 6), rng.random((6, 6)) < 0.6)
        A = PixelSet((6, 6), B.mask & (rng.random((6, 6)) < 0.5))
        ok, _ = boundary_of_union_check(A, B)
        assert ok

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_random_pairs_always_hold(self, rng, d):
        dims = {1: (16,), 2: (16, 16), 3: (6, 6, 6)}[d]
        for _ in range(60):
            A = PixelSet(dims, rng.random(dims) < rng.uniform(0.2, 0.8))
            B = PixelSet(dims, rng.random(dims) < rng.uniform(0.2, 0.8))
            ok, witness = boundary_of_union_check(A, B)
            assert ok, f"counterexample face {witness}"


class TestHighDensityRatio:
    def test_cube_indicator_ratio_zero(self):
        vals = np.zeros((8, 8))
        vals[2:6, 2:6] = 1.0
        f = grid_from_array(vals)
        fam = CubeFamily([GridCube((2, 2), 4)]).with_averages(f)
        p = partition_at(f, fam, 1.0)
        r = high_density_ratio(p, f)
        assert r.lhs == 0.0 and r.ratio == 0.0

    def test_empty_level_set_flagged(self):
        f = grid_from_array(np.zeros((4, 4)))
        fam = CubeFamily([GridCube((0, 0), 2)]).with_averages(f)
        p = partition_at(f, fam, 5.0)
        r = high_density_ratio(p, f)
        assert not r.defined or r.rhs > 0

    def test_random_suite_finite_max(self, rng):
        worst = 0.0
        for _ in range(15):
            f, fam = random_instance(rng, dims=(12, 12))
            for lam in lambda_breakpoints(f, fam.averages):
                r = high_density_ratio(partition_at(f, fam, float(lam)), f)
                if r.defined:
                    worst = max(worst, r.ratio)
        assert np.isfinite(worst)
