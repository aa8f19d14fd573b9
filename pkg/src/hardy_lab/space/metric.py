from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist

from .. import logger
from ..utilities import chunks, generator

TOPOLOGIES = ("grid", "torus", "table")
_TOPOLOGY_ALIASES = {
    "grid": "grid",
    "grid-r": "grid",
    "grid-rn": "grid",
    "torus": "torus",
    "torus-t": "torus",
    "torus-tn": "torus",
    "table": "table",
    "explicit-table": "table",
    "explicit": "table",
}

#   relative slack for closed-ball membership (dist <= r)
BALL_TOL = 1e-12

#   row chunk for distance scans (rows x n_points doubles per block)
ROW_CHUNK = 256

Rows = Union[int, Sequence[int], np.ndarray, slice]


def in_ball(distances: np.ndarray, r) -> np.ndarray:
    return distances <= np.asarray(r) * (1.0 + BALL_TOL)


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """
    Finite metric measure space.

    Points are integers 0..n-1. Grids and tori carry coordinates and a
    closed-form metric; explicit tables carry a distance matrix.
    """

    weights: np.ndarray
    topology: str
    dimension: float
    coords: Optional[np.ndarray] = None
    spacing: Optional[float] = None
    period: Optional[float] = None
    table: Optional[np.ndarray] = None
    ahlfors_constant: Optional[float] = None
    radius_range: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 1 or weights.size == 0:
            _fail("Space weights must be a non-empty vector")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            _fail("Space weights must be finite and strictly positive")
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)

        if self.topology not in TOPOLOGIES:
            _fail(f"Unknown topology '{self.topology}' (expected one of {TOPOLOGIES})")

        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=float)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != weights.size:
                _fail("Coordinates and weights disagree on the number of points")
            coords.flags.writeable = False
            object.__setattr__(self, "coords", coords)

        if self.topology == "table":
            if self.table is None:
                _fail("Explicit-table spaces need a distance table")
            table = np.asarray(self.table, dtype=float)
            if table.shape != (weights.size, weights.size):
                _fail(f"Distance table has shape {table.shape}, expected {(weights.size, weights.size)}")
            table.flags.writeable = False
            object.__setattr__(self, "table", table)
        elif self.coords is None:
            _fail(f"{self.topology} spaces need coordinates")

    @property
    def n_points(self) -> int:
        return int(self.weights.size)

    def __len__(self) -> int:
        return self.n_points

    @property
    def total_measure(self) -> float:
        return float(self.weights.sum())

    @property
    def ambient_dimension(self) -> int:
        if self.coords is None:
            return 0
        return int(self.coords.shape[1])

    @cached_property
    def resolution(self) -> float:
        """Grid spacing, or the smallest positive distance for tables."""
        if self.spacing is not None:
            return float(self.spacing)
        if self.n_points == 1:
            return 0.0
        d = self.distances
        return float(d[d > 0].min())

    def dist_rows(self, rows: Rows) -> np.ndarray:
        """Distances from the points in `rows` to every point, shape (len(rows), n)."""
        idx = _as_index(rows, self.n_points)
        if self.topology == "table":
            return np.array(self.table[idx], dtype=float)
        if self.topology == "grid":
            return cdist(self.coords[idx], self.coords)

        delta = np.abs(self.coords[idx][:, None, :] - self.coords[None, :, :])
        delta = np.minimum(delta, self.period - delta)
        return np.sqrt(np.sum(delta * delta, axis=-1))

    def pair_distances(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Elementwise dist(a[k], b[k])."""
        a = np.asarray(a, dtype=int)
        b = np.asarray(b, dtype=int)
        if self.topology == "table":
            return self.table[a, b]
        delta = np.abs(self.coords[a] - self.coords[b])
        if self.topology == "torus":
            delta = np.minimum(delta, self.period - delta)
        return np.sqrt(np.sum(delta * delta, axis=-1))

    def dist(self, x: int, y: int) -> float:
        return float(self.pair_distances(np.array([x]), np.array([y]))[0])

    @cached_property
    def distances(self) -> np.ndarray:
        """Full distance matrix (computed once)."""
        if self.n_points > 8192:
            logger.warning(f"Building a dense {self.n_points}x{self.n_points} distance matrix")
        out = np.empty((self.n_points, self.n_points))
        for blocki in chunks(self.n_points, ROW_CHUNK):
            out[blocki] = self.dist_rows(blocki)
        out.flags.writeable = False
        return out

    @cached_property
    def diameter(self) -> float:
        if self.n_points == 1:
            return 0.0
        if self.topology == "grid":
            return float(np.linalg.norm(self.coords.max(axis=0) - self.coords.min(axis=0)))
        if self.topology == "torus":
            #   homogeneous: the farthest point from point 0 realizes the diameter
            return float(self.dist_rows([0]).max())
        return float(self.table.max())

    def depth(self, basepoint: int) -> np.ndarray:
        """d(x) = 1 + dist(o, x)."""
        return 1.0 + self.dist_rows([basepoint])[0]

    def ball(self, x: int, r: float) -> np.ndarray:
        return np.flatnonzero(in_ball(self.dist_rows([x])[0], r))

    def ball_measure(self, x: int, r: float) -> float:
        mask = in_ball(self.dist_rows([x])[0], r)
        return float(self.weights[mask].sum())

    def nearest(self, coords) -> int:
        if self.coords is None:
            _fail("nearest() needs a space with coordinates")
        target = np.atleast_2d(np.asarray(coords, dtype=float))
        delta = np.abs(self.coords - target)
        if self.topology == "torus":
            delta = np.mod(delta, self.period)
            delta = np.minimum(delta, self.period - delta)
        return int(np.argmin(np.sum(delta * delta, axis=1)))

    def default_basepoint(self) -> int:
        """Point nearest the coordinate origin (point 0 for tables)."""
        if self.coords is None:
            return 0
        return self.nearest(np.zeros(self.ambient_dimension))

    def neighbor_sample(self, n_near: int = 8) -> np.ndarray:
        """
        For each point, indices of neighbors at distance ranks 1..n_near and
        at dyadic ranks beyond, shape (n, k). Used to sample pairs (y, z)
        across every separation scale.
        """
        n = self.n_points
        if n == 1:
            return np.zeros((1, 0), dtype=int)
        ranks = list(range(1, min(n_near, n - 1) + 1))
        rank = 2 * n_near
        while rank < n:
            ranks.append(rank)
            rank *= 2
        ranks.append(n - 1)
        ranks = np.unique(np.asarray(ranks, dtype=int))

        out = np.empty((n, ranks.size), dtype=int)
        for blocki in chunks(n, ROW_CHUNK):
            order = np.argsort(self.dist_rows(blocki), axis=1, kind="stable")
            out[blocki] = order[:, ranks]
        return out

    def with_ahlfors(self, A: float, r_min: float, r_max: float) -> "DiscreteSpace":
        return replace(self, ahlfors_constant=float(A), radius_range=(float(r_min), float(r_max)))

    @property
    def is_certified(self) -> bool:
        return self.ahlfors_constant is not None and np.isfinite(self.ahlfors_constant)


@dataclass(frozen=True, eq=False)
class Field:
    """Real function on a DiscreteSpace (one value per point)."""

    values: np.ndarray
    space: DiscreteSpace = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.shape != (self.space.n_points,):
            _fail(f"Field has shape {values.shape}, space has {self.space.n_points} points")
        if not np.all(np.isfinite(values)):
            _fail("Field values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, space: DiscreteSpace, value: float = 0.0) -> "Field":
        return cls(np.full(space.n_points, float(value)), space)

    @classmethod
    def zeros(cls, space: DiscreteSpace) -> "Field":
        return cls.constant(space, 0.0)

    @classmethod
    def point_mass(cls, space: DiscreteSpace, y: int, mass: float = 1.0) -> "Field":
        """Field with integral `mass` concentrated on the cell of y."""
        values = np.zeros(space.n_points)
        values[y] = mass / space.weights[y]
        return cls(values, space)

    @classmethod
    def indicator(cls, space: DiscreteSpace, points: Iterable[int], value: float = 1.0) -> "Field":
        values = np.zeros(space.n_points)
        values[np.asarray(list(points), dtype=int)] = value
        return cls(values, space)

    def _other(self, other) -> np.ndarray | float:
        if isinstance(other, Field):
            if other.space is not self.space:
                _fail("Fields live on different spaces")
            return other.values
        return float(other)

    def __add__(self, other) -> "Field":
        return Field(self.values + self._other(other), self.space)

    __radd__ = __add__

    def __sub__(self, other) -> "Field":
        return Field(self.values - self._other(other), self.space)

    def __mul__(self, other) -> "Field":
        return Field(self.values * self._other(other), self.space)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Field":
        return Field(self.values / self._other(other), self.space)

    def __neg__(self) -> "Field":
        return Field(-self.values, self.space)

    def abs(self) -> "Field":
        return Field(np.abs(self.values), self.space)

    def integral(self) -> float:
        return float(np.dot(self.values, self.space.weights))

    def norm(self, p: float = 1.0) -> float:
        if np.isinf(p):
            return float(np.abs(self.values).max())
        return float(np.dot(np.abs(self.values) ** p, self.space.weights) ** (1.0 / p))

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values != 0)

    def sup(self) -> float:
        return float(np.abs(self.values).max())


def build_space(
    topology: str,
    dimension: int = 1,
    extent: float = 1.0,
    spacing: float = 1.0 / 256.0,
    origin: float = 0.0,
    weights: Optional[np.ndarray] = None,
    distances: Optional[np.ndarray] = None,
    coords: Optional[np.ndarray] = None,
    ahlfors_dimension: Optional[float] = None,
    name: str = "",
) -> DiscreteSpace:
    """
    Build a grid, torus or explicit-table space.

    Parameters
    ----------
    topology : str
        "grid" (closed cube [origin, origin+extent]^n in R^n), "torus"
        (circumference `extent` per axis) or "table".
    dimension : int
        Ambient dimension n in {1, 2, 3} for grids and tori.
    extent : float
        Side length of the cube, or torus circumference.
    spacing : float
        Cell size; every weight is spacing^n.
    origin : float
        Lower corner of a grid.
    weights, distances, coords : array, optional
        Explicit-table inputs. Distances must be symmetric.
    ahlfors_dimension : float, optional
        D for table spaces (defaults to `dimension`).

    Returns
    -------
    DiscreteSpace
    """
    topology_key = _TOPOLOGY_ALIASES.get(str(topology).strip().lower())
    if topology_key is None:
        _fail(f"Unknown topology '{topology}'")

    if topology_key == "table":
        return table_space(
            weights=weights,
            distances=distances,
            coords=coords,
            dimension=ahlfors_dimension if ahlfors_dimension is not None else dimension,
            name=name,
        )

    if spacing is None or spacing <= 0:
        _fail(f"Spacing must be positive (got {spacing})")
    if extent <= spacing:
        _fail(f"Extent ({extent}) must exceed spacing ({spacing})")
    if int(dimension) != dimension or dimension not in (1, 2, 3):
        _fail(f"Grid and torus dimension must be 1, 2 or 3 (got {dimension})")
    dimension = int(dimension)

    cells = extent / spacing
    if topology_key == "grid":
        n_axis = int(np.floor(cells + 1e-9)) + 1
        axis = origin + spacing * np.arange(n_axis)
        period = None
    else:
        n_axis = int(round(cells))
        if abs(cells - n_axis) > 1e-9 * max(1.0, cells):
            _fail(f"Torus circumference {extent} is not a multiple of spacing {spacing}")
        axis = spacing * np.arange(n_axis)
        period = float(extent)

    mesh = np.meshgrid(*([axis] * dimension), indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    cell = np.full(points.shape[0], spacing ** dimension)

    space = DiscreteSpace(
        weights=cell,
        topology=topology_key,
        dimension=float(dimension),
        coords=points,
        spacing=float(spacing),
        period=period,
        name=name,
    )
    logger.info(f"Built {topology_key} space (n={dimension}, {space.n_points} points, spacing {spacing:g})")
    return space


def table_space(
    weights: np.ndarray,
    distances: np.ndarray,
    coords: Optional[np.ndarray] = None,
    dimension: float = 1.0,
    name: str = "",
) -> DiscreteSpace:
    if weights is None or distances is None:
        _fail("Explicit-table spaces need weights and distances")
    distances = np.asarray(distances, dtype=float)
    if distances.ndim != 2 or distances.shape[0] != distances.shape[1]:
        _fail("Distance table must be square")
    if not np.allclose(distances, distances.T, rtol=0.0, atol=1e-12):
        _fail("Distance table is not symmetric")
    if np.any(np.diag(distances) != 0):
        _fail("Distance table must vanish on the diagonal")
    off_diagonal = distances[~np.eye(distances.shape[0], dtype=bool)]
    if np.any(off_diagonal <= 0):
        _fail("Distinct points must be at positive distance")
    if dimension <= 0:
        _fail(f"Dimension must be positive (got {dimension})")

    return DiscreteSpace(
        weights=np.asarray(weights, dtype=float),
        topology="table",
        dimension=float(dimension),
        coords=coords,
        table=distances,
        name=name,
    )


def audit_triangle(space: DiscreteSpace, n_triples: int = 10_000, seed: int = 0) -> float:
    """
    Largest triangle-inequality excess d(x,z) - d(x,y) - d(y,z) over random
    triples (<= 0 up to rounding for a metric).
    """
    rng = generator(seed, "triangle", space.n_points)
    x, y, z = rng.integers(0, space.n_points, size=(3, n_triples))
    excess = (
        space.pair_distances(x, z)
        - space.pair_distances(x, y)
        - space.pair_distances(y, z)
    )
    return float(excess.max())


def equiv_dist_holds(space: DiscreteSpace, basepoint: int) -> bool:
    """
    For every pair with dist(x,y) <= d(y)/2, check d(y)/2 <= d(x) <= 2 d(y),
    where d = 1 + dist(o, .).
    """
    depth = space.depth(basepoint)
    for blocki in chunks(space.n_points, ROW_CHUNK):
        d_block = space.dist_rows(blocki)
        depth_y = depth[blocki][:, None]
        close = d_block <= depth_y / 2.0
        depth_x = np.broadcast_to(depth[None, :], d_block.shape)
        ok = (depth_x >= depth_y / 2.0 - 1e-12) & (depth_x <= 2.0 * depth_y + 1e-12)
        if np.any(close & ~ok):
            return False
    return True


def lipschitz_constant(values: np.ndarray, space: DiscreteSpace, radius: float = np.inf) -> float:
    """max |v(x) - v(y)| / d(x,y) over pairs with 0 < d(x,y) <= radius."""
    values = np.asarray(values, dtype=float)
    best = 0.0
    for blocki in chunks(space.n_points, ROW_CHUNK):
        d_block = space.dist_rows(blocki)
        diff = np.abs(values[blocki][:, None] - values[None, :])
        mask = (d_block > 0) & in_ball(d_block, radius)
        if np.any(mask):
            best = max(best, float((diff[mask] / d_block[mask]).max()))
    return best


def _as_index(rows: Rows, n: int) -> np.ndarray:
    if isinstance(rows, slice):
        return np.arange(n)[rows]
    return np.atleast_1d(np.asarray(rows, dtype=int))


def _fail(message: str):
    logger.error(message)
    raise ValueError(message)
