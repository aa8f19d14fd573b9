from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Union

import numpy as np
import polars as pl

from . import logger
from .space import Field


def _prepare(path: Union[str, Path]) -> Path:
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    return path


def _plain(value: Any) -> Any:
    """JSON-ready copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(ki): _plain(vi) for ki, vi in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(vi) for vi in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    return value


def dumps(data: Any) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_plain(data), sort_keys=True, indent=2) + "\n"


def write_json(data: Any, path: Union[str, Path]) -> Path:
    path = _prepare(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(data))
    return path


def write_frame(df: pl.DataFrame, path: Union[str, Path]) -> Path:
    path = _prepare(path)
    df.write_csv(path)
    return path


def write_field(f: Field, path: Union[str, Path]) -> Path:
    """CSV of (point_id, value) over every point."""
    df = pl.DataFrame({"point_id": np.arange(f.space.n_points), "value": f.values})
    return write_frame(df, path)


def write_maximal(result, path: Union[str, Path]) -> Path:
    """MaximalResult as (point_id, value, argmax_t)."""
    return write_frame(result.to_frame(), path)


def write_atom(atom, path: Union[str, Path]) -> tuple:
    """
    Atom or ion as a CSV of its support plus a JSON sidecar next to it
    (`<stem>.json`) holding ball, scale, flavor and the verdict.
    """
    path = Path(path)
    path_csv = write_frame(atom.to_frame(), path)
    path_json = write_json(atom.sidecar(), path.with_suffix(".json"))
    return path_csv, path_json


def write_decomposition(dec, path: Union[str, Path]) -> tuple:
    """Decomposition JSON plus the residual trace as `<stem>_trace.csv`."""
    path = Path(path)
    path_json = write_json(dec.to_dict(), path.with_suffix(".json"))
    path_trace = write_frame(dec.trace(), path.with_name(f"{path.stem}_trace.csv"))
    logger.info(f"Wrote decomposition ({dec.n_levels} levels) to {path_json.as_posix()}")
    return path_json, path_trace


def write_lp(problem, path: Union[str, Path]) -> Path:
    """HolderCutoffLP as CPLEX-LP text."""
    path = _prepare(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(problem.to_text())
    return path
