import json

import numpy as np
import pytest

from cubemax import CubeFamily, GridCube, GridFunction, grid_from_array
from cubemax.io import (
    canonical_json,
    family_from_json,
    family_to_json,
    read_grid_binary,
    read_grid_csv,
    read_plot_columns,
    write_grid_binary,
    write_grid_csv,
    write_plot_columns,
)
from cubemax.sparse import greedy_sparse


class TestGridFormats:
    def test_csv_round_trip_2d(self, rng, tmp_path):
        f = GridFunction((5, 7), 0.25, rng.random(35))
        p = tmp_path / "g.csv"
        write_grid_csv(f, p)
        g = read_grid_csv(p)
        assert g.dims == f.dims and g.h == f.h
        assert np.array_equal(g.values, f.values)

    def test_csv_round_trip_1d(self, rng, tmp_path):
        f = GridFunction((9,), 2.0, rng.random(9))
        p = tmp_path / "g.csv"
        write_grid_csv(f, p)
        g = read_grid_csv(p)
        assert g.dims == f.dims and np.array_equal(g.values, f.values)

    def test_binary_round_trip_3d(self, rng, tmp_path):
        f = GridFunction((3, 4, 5), 0.125, rng.standard_normal(60))
        p = tmp_path / "g.bin"
        write_grid_binary(f, p)
        g = read_grid_binary(p)
        assert g.dims == f.dims and g.h == f.h
        assert np.array_equal(g.values, f.values)

    def test_binary_magic_guard(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(ValueError):
            read_grid_binary(p)


class TestFamilyJson:
    def test_round_trip(self):
        fam = CubeFamily([GridCube((0, 1), 2), GridCube((3, 3), 1)])
        obj = family_to_json(fam, (8, 8), 0.5)
        text = canonical_json(obj)
        back, dims, h = family_from_json(json.loads(text))
        assert back.cubes == fam.cubes and dims == (8, 8) and h == 0.5

    def test_sparse_family_preserves_selection_order(self, rng):
        f = grid_from_array(rng.integers(0, 5, (8, 8)).astype(float))
        cubes = [GridCube((0, 0), 4), GridCube((4, 4), 2), GridCube((2, 2), 2)]
        sp = greedy_sparse(f, CubeFamily(cubes).with_averages(f))
        obj = sp.to_json()
        assert [tuple(c["anchor"]) for c in obj["cubes"]] == \
            [c.anchor for c in sp.cubes]


class TestCanonicalJson:
    def test_sorted_keys_and_17_digits(self):
        text = canonical_json({"b": 1 / 3, "a": 2})
        assert text.index('"a"') < text.index('"b"')
        assert "0.33333333333333331" in text

    def test_round_trips_through_loads(self):
        obj = {"x": [1.5, 2, True, None], "y": {"z": 1e-17}}
        assert json.loads(canonical_json(obj)) == obj

    def test_special_floats(self):
        text = canonical_json([float("inf"), float("-inf")])
        got = json.loads(text)
        assert got[0] == float("inf") and got[1] == float("-inf")

    def test_deterministic_bytes(self):
        obj = {"k": [0.1, 0.2, 0.30000000000000004], "m": {"n": 7}}
        assert canonical_json(obj) == canonical_json(json.loads(canonical_json(obj)))


class TestPlotData:
    def test_columns_round_trip(self, tmp_path):
        p = tmp_path / "d.dat"
        xs = [0.0, 1.0, 2.0]
        ys = [3.75, 6.75, 12.75]
        write_plot_columns(p, [xs, ys], comment="n variation")
        back = read_plot_columns(p)
        assert np.array_equal(back[0], xs) and np.array_equal(back[1], ys)


class TestMaxFunctionEmission:
    def test_maximal_function_round_trips_formats(self, rng, tmp_path):
        from cubemax.maximal import maximal_global
        f = grid_from_array(rng.random((6, 6)), h=0.5)
        mf = maximal_global(f)
        p_csv = tmp_path / "m.csv"
        p_bin = tmp_path / "m.bin"
        write_grid_csv(mf.func, p_csv)
        write_grid_binary(mf.func, p_bin)
        assert np.array_equal(read_grid_csv(p_csv).values, mf.values)
        assert np.array_equal(read_grid_binary(p_bin).values, mf.values)


class TestOverlapFamilyJson:
    def test_serialization_fields(self, rng):
        from cubemax.sparse import default_contraction, disjoint_select
        f = grid_from_array(rng.random((8, 8)))
        q0 = GridCube((0, 0), 4)
        out = disjoint_select(CubeFamily([q0]), {q0: [q0, GridCube((0, 0), 2)]},
                              default_contraction(2), f)
        obj = out.to_json()
        assert set(obj) == {"cubes", "eps", "C", "C1", "C2"}
        assert obj["C"] >= 1
