from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .. import logger
from .ahlfors import verify_ahlfors
from .metric import ROW_CHUNK, DiscreteSpace, Field, in_ball
from ..utilities import chunks


@dataclass(frozen=True, eq=False)
class Net:
    """
    Centers x_j at scale t around a basepoint, with the seeds y_j they were
    picked from. `overlap` and `average_constant` are the realized values of
    the finite-overlap and averaging properties.
    """

    centers: np.ndarray
    seeds: np.ndarray
    t: float
    a: float
    basepoint: int
    overlap: int
    average_constant: float
    averaged: Optional[Field] = None

    def __len__(self) -> int:
        return int(self.centers.size)

    @property
    def constant(self) -> float:
        """Single constant bounding both overlap and averaging."""
        return float(max(self.overlap, self.average_constant, 1.0))


@dataclass
class NetReport:
    txjbd: bool
    cover: bool
    overlap: bool
    average: bool
    realized_overlap: int
    realized_average: float
    seed_ratio: float
    overlap_bound: float
    average_bound: float
    uncovered: list

    @property
    def passed(self) -> bool:
        return self.txjbd and self.cover and self.overlap and self.average

    def to_dict(self) -> dict:
        return asdict(self)


def separated_set(
    space: DiscreteSpace,
    candidates: np.ndarray,
    separation: np.ndarray | float,
    pairwise_min: bool = False,
) -> np.ndarray:
    """
    Greedy maximal separated subset of `candidates`, in index order.

    With `pairwise_min`, `separation` is per point and two points are
    separated when dist >= min(sep_y, sep_k); otherwise dist >= separation.
    """
    candidates = np.asarray(candidates, dtype=int)
    separation = np.broadcast_to(np.asarray(separation, dtype=float), (space.n_points,))
    accepted = []
    for yi in candidates:
        if accepted:
            row = space.dist_rows([yi])[0][accepted]
            if pairwise_min:
                need = np.minimum(separation[yi], separation[accepted])
            else:
                need = separation[yi]
            if np.any(row < need):
                continue
        accepted.append(int(yi))
    return np.asarray(accepted, dtype=int)


def maximal_net(
    space: DiscreteSpace,
    basepoint: int,
    t: float,
    a: float = 1.0,
    g: Optional[Field] = None,
) -> Net:
    """
    Two-stage net construction.

    1. Greedy maximal set {y_j} of {y : t d(y) <= 1/2} with
       d(y_j, y_k) >= a t min(d(y_j), d(y_k)) / 4.
    2. For each j, x_j in B(y_j, a t d(y_j) / 4) with g(x_j) <= 2 * average
       of g over that ball (y_j itself when it qualifies, otherwise the
       minimizer of g).

    Parameters
    ----------
    space : DiscreteSpace
    basepoint : int
        o, with d(x) = 1 + dist(o, x).
    t : float
        Scale in (0, 1/2].
    a : float
        Cover parameter in (0, 1].
    g : Field, optional
        Nonnegative averaged field. Defaults to g = 1.

    Returns
    -------
    Net
    """
    if not 0 < t <= 0.5:
        message = f"Net scale t must lie in (0, 1/2] (got {t})"
        logger.error(message)
        raise ValueError(message)
    if not 0 < a <= 1:
        message = f"Cover parameter a must lie in (0, 1] (got {a})"
        logger.error(message)
        raise ValueError(message)
    if g is None:
        g = Field.constant(space, 1.0)
    gv = g.values
    if np.any(gv < 0):
        message = "Averaged field g must be nonnegative"
        logger.error(message)
        raise ValueError(message)

    depth = space.depth(basepoint)
    eligible = np.flatnonzero(t * depth <= 0.5 * (1.0 + 1e-12))
    if eligible.size == 0:
        return Net(
            centers=np.zeros(0, dtype=int),
            seeds=np.zeros(0, dtype=int),
            t=float(t),
            a=float(a),
            basepoint=int(basepoint),
            overlap=0,
            average_constant=0.0,
            averaged=g,
        )

    seeds = separated_set(space, eligible, a * t * depth / 4.0, pairwise_min=True)

    centers = np.empty_like(seeds)
    w = space.weights
    for j, yj in enumerate(seeds):
        row = space.dist_rows([yj])[0]
        ball = np.flatnonzero(in_ball(row, a * t * depth[yj] / 4.0))
        average = float(np.dot(gv[ball], w[ball]) / w[ball].sum())
        if gv[yj] <= 2.0 * average:
            centers[j] = yj
        else:
            centers[j] = ball[np.argmin(gv[ball])]

    overlap, average_constant = _realized_constants(space, centers, t, depth, gv)

    return Net(
        centers=centers,
        seeds=seeds,
        t=float(t),
        a=float(a),
        basepoint=int(basepoint),
        overlap=overlap,
        average_constant=average_constant,
        averaged=g,
    )


def _realized_constants(
    space: DiscreteSpace,
    centers: np.ndarray,
    t: float,
    depth: np.ndarray,
    gv: np.ndarray,
) -> tuple:
    """Pointwise overlap of B(x_j, t d(x_j)) and max_j g(x_j) / avg_{B_j} g."""
    counts = np.zeros(space.n_points, dtype=int)
    average_constant = 0.0
    w = space.weights
    for blocki in chunks(centers.size, ROW_CHUNK):
        block = centers[blocki]
        d_block = space.dist_rows(block)
        member = in_ball(d_block, (t * depth[block])[:, None])
        counts += member.sum(axis=0)

        mass = member @ w
        integral = member @ (gv * w)
        average = integral / mass
        g_center = gv[block]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(g_center > 0, g_center / average, 0.0)
        if ratio.size:
            average_constant = max(average_constant, float(ratio.max()))
    return int(counts.max()) if counts.size else 0, average_constant


def overlap_bound(A: float, D: float, a: float) -> float:
    """
    Packing bound on the pointwise overlap of B(x_j, t d(x_j)).

    Seeds whose ball reaches x lie in B(x, 3 t d(x)) and are pairwise
    a t d(x) / 16 apart, so at most A^2 (1 + 96 / a)^D of them fit.
    """
    return float(A**2 * (1.0 + 96.0 / a) ** D)


def average_bound(A: float, D: float, a: float) -> float:
    """Bound on g(x_j) / avg_{B(x_j, t d(x_j))} g implied by the seed-ball selection."""
    return float(2.0 * A**2 * (8.0 / a) ** D)


def _net_ahlfors_constant(space: DiscreteSpace) -> float:
    if space.is_certified:
        return float(space.ahlfors_constant)
    logger.info("Net check on an uncertified space: fitting the Ahlfors constant")
    return float(verify_ahlfors(space, space.dimension).fitted_A)


def _seed_ball_ratio(space: DiscreteSpace, net: Net, depth: np.ndarray, gv: np.ndarray) -> float:
    """max_j g(x_j) / avg of g over B(y_j, a t d(y_j) / 4), with x_j required in that ball."""
    ratio = 0.0
    w = space.weights
    for xj, yj in zip(net.centers, net.seeds):
        row = space.dist_rows([yj])[0]
        ball = in_ball(row, net.a * net.t * depth[yj] / 4.0)
        if not ball[xj]:
            return float("inf")
        average = float(np.dot(gv[ball], w[ball]) / w[ball].sum())
        if gv[xj] > 0:
            ratio = max(ratio, float(gv[xj]) / average)
    return ratio


def verify_net(net: Net, space: DiscreteSpace, g: Optional[Field] = None) -> NetReport:
    """
    Brute-force re-check of the four conclusions of the net construction.

    Overlap is held to the Ahlfors packing bound, the seed-ball selection
    to the factor 2, and the realized average over B(x_j, t d(x_j)) to
    the bound that selection implies.
    """
    if g is None:
        g = net.averaged if net.averaged is not None else Field.constant(space, 1.0)
    depth = space.depth(net.basepoint)
    t = net.t
    centers = net.centers

    txjbd = bool(np.all(t * depth[centers] <= 1.0 + 1e-12))

    needs_cover = np.flatnonzero(t * depth <= 0.5 * (1.0 + 1e-12))
    covered = np.zeros(space.n_points, dtype=bool)
    for blocki in chunks(centers.size, ROW_CHUNK):
        block = centers[blocki]
        d_block = space.dist_rows(block)
        covered |= np.any(in_ball(d_block, (net.a * t * depth[block])[:, None]), axis=0)
    uncovered = [int(x) for x in needs_cover if not covered[x]]

    overlap, average_constant = _realized_constants(space, centers, t, depth, g.values)
    seed_ratio = _seed_ball_ratio(space, net, depth, g.values)

    A = _net_ahlfors_constant(space)
    L_overlap = overlap_bound(A, space.dimension, net.a)
    L_average = average_bound(A, space.dimension, net.a)

    return NetReport(
        txjbd=txjbd,
        cover=len(uncovered) == 0,
        overlap=overlap <= L_overlap,
        average=seed_ratio <= 2.0 * (1.0 + 1e-12) and average_constant <= L_average * (1.0 + 1e-12),
        realized_overlap=overlap,
        realized_average=average_constant,
        seed_ratio=seed_ratio,
        overlap_bound=L_overlap,
        average_bound=L_average,
        uncovered=uncovered[:20],
    )
