import json
import logging
import os
from typing import Union

import numpy as np
import pandas as pd

from .convexfn import GridFunction
from .extended import format_ext
from .representations import GridBifunction

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]


def _ensure_parent(path: PathLike):
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)


def _node_frame(nodes: np.ndarray, values: np.ndarray, columns) -> pd.DataFrame:
    df = pd.DataFrame(nodes, columns=columns)
    df["value"] = values
    return df


def save_grid_function(f: GridFunction, path: PathLike) -> pd.DataFrame:
    """
    Write the raw samples of a grid function as CSV.

    Columns are x0..x{n-1} and value; +inf is written as the literal "inf".
    """
    df = _node_frame(f.nodes, f.values, [f"x{i}" for i in range(f.dim)])
    _ensure_parent(path)
    df.to_csv(path, index=False, float_format="%.17g")
    logger.info("Stored %d grid samples to %s", len(df), path)
    return df


def load_grid_function(path: PathLike) -> GridFunction:
    """Read a grid function written by save_grid_function."""
    df = pd.read_csv(path, float_precision="round_trip")
    node_cols = [c for c in df.columns if c != "value"]
    return GridFunction(df[node_cols].to_numpy(dtype=float), df["value"].to_numpy(dtype=float))


def save_grid_bifunction(h: GridBifunction, path: PathLike) -> pd.DataFrame:
    """Write a grid bifunction as CSV with columns x0.., xstar0.., value."""
    n = h.dim
    columns = [f"x{i}" for i in range(n)] + [f"xstar{i}" for i in range(n)]
    df = _node_frame(h.nodes, h.raw_values, columns)
    _ensure_parent(path)
    df.to_csv(path, index=False, float_format="%.17g")
    logger.info("Stored %d bifunction samples to %s", len(df), path)
    return df


def load_grid_bifunction(path: PathLike) -> GridBifunction:
    """Read a grid bifunction written by save_grid_bifunction."""
    df = pd.read_csv(path, float_precision="round_trip")
    x_cols = [c for c in df.columns if c.startswith("x") and not c.startswith("xstar")]
    xs_cols = [c for c in df.columns if c.startswith("xstar")]
    nodes = df[x_cols + xs_cols].to_numpy(dtype=float)
    return GridBifunction(nodes, df["value"].to_numpy(dtype=float), label=os.path.basename(os.fspath(path)))


def save_trace_csv(trace, path: PathLike) -> pd.DataFrame:
    """Write a RefinementTrace as CSV (k, x.., xstar.., gap, step_norm_x, step_norm_xstar)."""
    df = trace.to_frame()
    _ensure_parent(path)
    df.to_csv(path, index=False, float_format="%.17g")
    logger.info("Stored refinement trace with %d rows to %s", len(df), path)
    return df


def save_summary_json(summary: dict, path: PathLike):
    """Write a report dictionary as JSON with infinities spelled "inf"."""
    _ensure_parent(path)
    with open(path, "w") as fh:
        json.dump(format_ext(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
