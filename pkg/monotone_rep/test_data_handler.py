"""
Tests for CSV and JSON persistence of grids, traces and reports.
"""
import json

import numpy as np
import pandas as pd
import pytest

from monotone_rep.convexfn import BoxIndicator, GridFunction, Quadratic
from monotone_rep.data_handler import (load_grid_bifunction, load_grid_function, save_grid_bifunction,
                                       save_grid_function, save_summary_json, save_trace_csv)
from monotone_rep.operators import PrimalDualPoint
from monotone_rep.refine import br_refine
from monotone_rep.representations import GridBifunction, SeparableBifunction


def test_grid_function_keeps_infinite_samples(tmp_path):
    nodes = np.linspace(-1.0, 1.0, 5)[:, None]
    values = np.array([np.inf, 0.25, 0.0, 0.25, np.inf])
    path = tmp_path / "f.csv"
    save_grid_function(GridFunction(nodes, values), path)

    assert "inf" in path.read_text()
    loaded = load_grid_function(path)
    assert np.array_equal(loaded.nodes, nodes)
    assert np.array_equal(loaded.values, values)
    assert loaded([0.5]) == pytest.approx(0.25)
    assert loaded([0.9]) == np.inf


def test_grid_function_exact_floats(tmp_path):
    grid = GridFunction.sample(Quadratic([[1.0]]), radius=1.0, resolution=7)
    path = tmp_path / "q.csv"
    save_grid_function(grid, path)
    assert np.array_equal(load_grid_function(path).values, grid.values)


def test_grid_bifunction_columns(tmp_path):
    h = GridBifunction.sample(SeparableBifunction(BoxIndicator([-1.0], [1.0])), radius=2.0, resolution=5)
    path = tmp_path / "nested" / "h.csv"
    df = save_grid_bifunction(h, path)
    assert list(df.columns) == ["x0", "xstar0", "value"]

    loaded = load_grid_bifunction(path)
    assert loaded.dim == 1
    assert np.array_equal(loaded.raw_values, h.raw_values)
    assert loaded(PrimalDualPoint([0.0], [1.0])) == pytest.approx(h(PrimalDualPoint([0.0], [1.0])))


def test_grid_bifunction_exact_floats(tmp_path):
    rng = np.random.default_rng(3)
    nodes = rng.uniform(-1.0, 1.0, size=(40, 2))
    values = np.sum(nodes ** 2, axis=1) / 3.0
    h = GridBifunction(nodes, values)
    path = tmp_path / "h.csv"
    save_grid_bifunction(h, path)
    loaded = load_grid_bifunction(path)
    assert np.array_equal(loaded.nodes, h.nodes)
    assert np.array_equal(loaded.raw_values, h.raw_values)


def test_trace_csv(tmp_path):
    trace = br_refine(SeparableBifunction(Quadratic([[1.0]])), PrimalDualPoint([0.0], [1.0]), 0.6)
    path = tmp_path / "trace.csv"
    save_trace_csv(trace, path)
    df = pd.read_csv(path, float_precision="round_trip")
    assert len(df) == len(trace.iterates)
    assert df["gap"].iloc[0] == pytest.approx(0.5)
    assert df["step_norm_x"].iloc[0] == 0.0


def test_summary_json_spells_infinity(tmp_path):
    path = tmp_path / "summary.json"
    save_summary_json({"value": np.inf, "point": np.array([1.0, 2.0]), "ok": np.bool_(True)}, path)
    data = json.loads(path.read_text())
    assert data == {"ok": True, "point": [1.0, 2.0], "value": "inf"}


if __name__ == "__main__":
    print("=" * 60)
    print("Testing data handler")
    print("=" * 60)
    raise SystemExit(pytest.main([__file__, "-q"]))
