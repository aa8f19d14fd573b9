from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import numpy as np
import polars as pl

from . import logger
from .space import DiscreteSpace, Field, build_space


def _require_file(path: Union[str, Path]) -> Path:
    path = Path(path)
    if not path.is_file():
        message = f"File not found: {path.as_posix()}"
        logger.error(message)
        raise FileNotFoundError(message)
    return path


def load_field(path: Union[str, Path], space: DiscreteSpace) -> Field:
    """
    Read a field from a CSV of (point_id, value).

    Points missing from the file get 0, so sparse files (atoms, supports)
    round-trip. Duplicate or out-of-range ids are errors.
    """
    path = _require_file(path)
    df = pl.read_csv(path, schema_overrides={"point_id": pl.Int64, "value": pl.Float64})
    missing = {"point_id", "value"} - set(df.columns)
    if missing:
        message = f"{path.name} is missing columns {sorted(missing)}"
        logger.error(message)
        raise ValueError(message)

    ids = df["point_id"].to_numpy()
    if ids.size and (ids.min() < 0 or ids.max() >= space.n_points):
        message = f"{path.name} has point ids outside [0, {space.n_points})"
        logger.error(message)
        raise ValueError(message)
    if np.unique(ids).size != ids.size:
        message = f"{path.name} repeats point ids"
        logger.error(message)
        raise ValueError(message)

    values = np.zeros(space.n_points)
    values[ids] = df["value"].to_numpy()
    return Field(values, space)


def load_table_space(
    path_points: Union[str, Path],
    path_distances: Optional[Union[str, Path]] = None,
    dimension: float = 1.0,
    name: str = "",
) -> DiscreteSpace:
    """
    Read an explicit-table space.

    Parameters
    ----------
    path_points : str or Path
        CSV with columns id, weight and any number of coordinate columns
        (every other column, in file order).
    path_distances : str or Path, optional
        CSV of (id_a, id_b, distance) rows covering every unordered pair.
        Without it the distances are Euclidean in the coordinates.
    dimension : float
        Ahlfors dimension D.
    name : str

    Returns
    -------
    DiscreteSpace
    """
    path_points = _require_file(path_points)
    df = pl.read_csv(path_points)
    for columni in ("id", "weight"):
        if columni not in df.columns:
            message = f"{path_points.name} needs an '{columni}' column"
            logger.error(message)
            raise ValueError(message)

    df = df.sort("id")
    ids = df["id"].to_numpy()
    n = ids.size
    if not np.array_equal(ids, np.arange(n)):
        message = f"{path_points.name}: ids must be 0..{n - 1} without gaps"
        logger.error(message)
        raise ValueError(message)

    coord_columns = [ci for ci in df.columns if ci not in ("id", "weight")]
    coords = df.select(coord_columns).to_numpy().astype(float) if coord_columns else None
    weights = df["weight"].to_numpy().astype(float)

    if path_distances is not None:
        path_distances = _require_file(path_distances)
        pairs = pl.read_csv(path_distances)
        a = pairs["id_a"].to_numpy()
        b = pairs["id_b"].to_numpy()
        d = pairs["distance"].to_numpy().astype(float)
        distances = np.full((n, n), np.nan)
        np.fill_diagonal(distances, 0.0)
        distances[a, b] = d
        distances[b, a] = d
        if np.isnan(distances).any():
            message = f"{path_distances.name} does not cover every pair of points"
            logger.error(message)
            raise ValueError(message)
    elif coords is not None:
        diff = coords[:, None, :] - coords[None, :, :]
        distances = np.sqrt((diff**2).sum(axis=-1))
    else:
        message = "Table spaces need coordinates or a distance file"
        logger.error(message)
        raise ValueError(message)

    logger.info(f"Loaded table space {path_points.name} ({n} points)")
    return build_space(
        "table",
        weights=weights,
        distances=distances,
        coords=coords,
        ahlfors_dimension=dimension,
        name=name or path_points.stem,
    )
