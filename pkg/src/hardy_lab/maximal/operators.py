from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np
import polars as pl

from .. import logger
from ..kernels import Kernel
from ..space import DiscreteSpace, Field
from ..space.metric import BALL_TOL, ROW_CHUNK
from ..utilities import chunks, parallel_map, r_grid, t_grid

#   share of points whose sup sits at the smallest time before warning
UNRESOLVED_SHARE = 0.05


@dataclass(frozen=True, eq=False)
class MaximalResult:
    field: Field
    argmax_t: np.ndarray
    method: str
    grid: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def to_frame(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "point_id": np.arange(self.field.space.n_points),
                "value": self.field.values,
                "argmax_t": self.argmax_t,
            }
        )


def apply_kernel(kernel: Kernel, t: float, f: Field) -> Field:
    """(K_t f)(x) = sum_y K(t,x,y) f(y) m(y)."""
    space = f.space
    fw = f.values * space.weights
    out = np.empty(space.n_points)
    for blocki in chunks(space.n_points, ROW_CHUNK):
        rows = np.arange(space.n_points)[blocki]
        out[blocki] = kernel.evaluate(space, t, rows) @ fw
    return Field(out, space)


def radial_maximal(
    kernel: Kernel,
    f: Field,
    t_min: Optional[float] = None,
    times: Optional[Sequence[float]] = None,
) -> MaximalResult:
    """
    K*f(x) = max over the time grid of |K_t f(x)|, with the maximizing time.

    Warns when more than 5% of the points with a nonzero sup take it at
    the smallest time (the sup may lie below the grid).
    """
    space = f.space
    if times is None:
        times = t_grid(space.resolution, t_min=t_min)
    times = np.sort(np.asarray(times, dtype=float))

    applied = parallel_map(lambda ti: np.abs(apply_kernel(kernel, float(ti), f).values), times)
    stack = np.stack(applied)
    best = np.argmax(stack, axis=0)
    values = stack[best, np.arange(space.n_points)]

    nonzero = values > 0
    if np.any(nonzero) and times.size > 1:
        share = float(np.mean(best[nonzero] == 0))
        if share > UNRESOLVED_SHARE:
            logger.warning(
                f"Radial maximal sup sits at t_min = {times[0]:g} for {100 * share:.1f}% of points"
            )

    return MaximalResult(
        field=Field(values, space),
        argmax_t=times[best],
        method=f"radial:{kernel.kind}",
        grid=times,
    )


def hl_maximal(
    space: DiscreteSpace,
    f: Field,
    R: float,
    radii: Optional[Sequence[float]] = None,
) -> Field:
    """M_R f(x) = max over radii r <= R of the average of |f| over B(x, r)."""
    if R < 2.0 * space.resolution:
        message = f"R = {R:g} is below resolution (needs >= 2 * {space.resolution:g})"
        logger.error(message)
        raise ValueError(message)
    if radii is None:
        radii = r_grid(R, space.resolution)
    radii = np.asarray(radii, dtype=float) * (1.0 + BALL_TOL)

    absw = np.abs(f.values) * space.weights

    def _block(blocki: slice) -> np.ndarray:
        d_raw = space.dist_rows(blocki)
        order = np.argsort(d_raw, axis=1, kind="stable")
        d_sorted = np.take_along_axis(d_raw, order, axis=1)
        cum_w = np.cumsum(space.weights[order], axis=1)
        cum_f = np.cumsum(absw[order], axis=1)

        best = np.zeros(d_sorted.shape[0])
        for rowi in range(d_sorted.shape[0]):
            counts = np.searchsorted(d_sorted[rowi], radii, side="right")
            counts = counts[counts > 0] - 1
            if counts.size:
                best[rowi] = float((cum_f[rowi, counts] / cum_w[rowi, counts]).max())
        return best

    parts = parallel_map(_block, list(chunks(space.n_points, ROW_CHUNK)))
    return Field(np.concatenate(parts), space)


def _riesz_row_weights(space: DiscreteSpace, d_block: np.ndarray, rows: np.ndarray, lam: float) -> np.ndarray:
    """Kernel of I_lam: d^{-(D-1)} on 0 < d <= lam, plus the self cell at radius spacing/2."""
    D = space.dimension
    exponent = -(D - 1.0)
    inside = (d_block > 0) & (d_block <= lam * (1.0 + BALL_TOL))
    with np.errstate(divide="ignore"):
        kernel = np.where(inside, np.where(d_block > 0, d_block, 1.0) ** exponent, 0.0)
    kernel[np.arange(rows.size), rows] = (0.5 * space.resolution) ** exponent
    return kernel


def riesz_potential(space: DiscreteSpace, f: Field, lam: float) -> Field:
    """
    I_lam f(x) = sum_{0 < d(x,y) <= lam} |f(y)| d(x,y)^{-(D-1)} m(y), with the
    cell of x itself counted at radius spacing/2.
    """
    if lam < 2.0 * space.resolution:
        message = f"lambda = {lam:g} is below resolution (needs >= 2 * {space.resolution:g})"
        logger.error(message)
        raise ValueError(message)
    absw = np.abs(f.values) * space.weights
    out = np.empty(space.n_points)
    for blocki in chunks(space.n_points, ROW_CHUNK):
        rows = np.arange(space.n_points)[blocki]
        out[blocki] = _riesz_row_weights(space, space.dist_rows(rows), rows, lam) @ absw
    return Field(out, space)


def riesz_l1_constant(space: DiscreteSpace, lam: float) -> float:
    """||I_lam||_{L1 -> L1} = max_y sum_x k(x,y) m(x) (the kernel is symmetric)."""
    best = 0.0
    for blocki in chunks(space.n_points, ROW_CHUNK):
        rows = np.arange(space.n_points)[blocki]
        columns = _riesz_row_weights(space, space.dist_rows(rows), rows, lam) @ space.weights
        best = max(best, float(columns.max()))
    return best


@dataclass
class DominationFit:
    C: float
    per_field: list
    n_fields: int
    R: float

    def to_dict(self) -> dict:
        return asdict(self)


def fit_domination(
    kernel: Kernel,
    space: DiscreteSpace,
    fields: Sequence[Field],
    R: float,
    t_min: Optional[float] = None,
) -> DominationFit:
    """Smallest C with K*f <= C M_R f at every point, over the given fields."""
    per_field = []
    for fi in fields:
        if fi.space is not space:
            message = "fit_domination fields must live on the given space"
            logger.error(message)
            raise ValueError(message)
        star = radial_maximal(kernel, fi, t_min=t_min).values
        hl = hl_maximal(space, fi, R).values
        positive = hl > 0
        if np.any(star[~positive] > 1e-14):
            per_field.append(float("inf"))
            continue
        per_field.append(float((star[positive] / hl[positive]).max()) if np.any(positive) else 0.0)
    C = max(per_field) if per_field else 0.0
    logger.info(f"K* <= C M_R f with C = {C:.4g} over {len(per_field)} fields (R = {R:g})")
    return DominationFit(C=float(C), per_field=per_field, n_fields=len(per_field), R=float(R))
