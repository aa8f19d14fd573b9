from __future__ import annotations

from typing import Optional

import numpy as np

from .. import logger
from ..exceptions import CertificationError
from ..space import DiscreteSpace, taper
from ..utilities import chunks, t_grid
from ..space.metric import ROW_CHUNK
from .kernel import Kernel

#   growth of the tail norm over the last octave that counts as divergence
DIVERGENCE_GROWTH = 0.10


class LocalizedKernel(Kernel):
    """
    phi(d(x,y)) K(t,x,y) (part="local") or (1 - phi(d(x,y))) K(t,x,y)
    (part="tail"), with phi = 1 on [0, lam/2] and 0 beyond lam.
    """

    kind = "localized"

    def __init__(self, base: Kernel, lam: float, part: str = "local"):
        if part not in ("local", "tail"):
            message = f"Localized part must be 'local' or 'tail' (got '{part}')"
            logger.error(message)
            raise ValueError(message)
        super().__init__(
            gamma=base.gamma,
            support=lam if part == "local" else base.support,
            dimension=base.dimension,
            params=dict(base=base.kind, lam=float(lam), part=part),
        )
        self.base = base
        self.lam = float(lam)
        self.part = part

    def cutoff(self, d: np.ndarray) -> np.ndarray:
        return taper(d, 0.5 * self.lam, self.lam)

    def _evaluate(self, space: DiscreteSpace, t: np.ndarray, rows: np.ndarray) -> np.ndarray:
        phi = self.cutoff(space.dist_rows(rows))
        if self.part == "tail":
            phi = 1.0 - phi
        return phi * self.base.evaluate(space, t, rows)


def tail_norm_trend(
    tail: Kernel,
    space: DiscreteSpace,
    t_min: Optional[float] = None,
    n_rows: Optional[int] = None,
) -> list:
    """
    sup_y int sup_t |tail(t,x,y)| dm(x), with the sup over t restricted to
    [t_k, 1], for t_k running down the time grid one octave at a time.
    The kernel is taken to be symmetric, so rows play the role of y.
    """
    times = t_grid(space.resolution, t_min=t_min)[::-1]
    if n_rows is None or n_rows >= space.n_points:
        rows = np.arange(space.n_points)
    else:
        rows = np.unique(np.round(np.linspace(0, space.n_points - 1, n_rows)).astype(int))

    running = np.zeros((rows.size, space.n_points))
    trend = []
    for k, ti in enumerate(times):
        for blocki in chunks(rows.size, ROW_CHUNK):
            block = np.abs(tail.evaluate(space, ti, rows[blocki]))
            np.maximum(running[blocki], block, out=running[blocki])
        if (times.size - 1 - k) % 8 == 0:
            trend.append(dict(t=float(ti), norm=float((running @ space.weights).max())))
    return trend


def split_ai(
    kernel: Kernel,
    lam: float,
    space: DiscreteSpace,
    t_min: Optional[float] = None,
    n_rows: Optional[int] = None,
) -> tuple:
    """
    Split K = phi K + (1 - phi) K into a lam-local part and a tail.

    Parameters
    ----------
    kernel : Kernel
    lam : float
        Support radius of the local part (at least 4 * resolution).
    space : DiscreteSpace
        Space on which the tail norm is computed.
    t_min : float, optional
        Smallest time of the sup over t.
    n_rows : int, optional
        Sampled y points for the tail norm (all points by default).

    Returns
    -------
    (LocalizedKernel, LocalizedKernel, float)
        Local part, tail, and sup_y int sup_t |tail(t,x,y)| dm(x).

    Raises
    ------
    CertificationError
        When the tail norm is still growing by more than 10% over the last
        octave of the time grid; `witnesses` holds the trend.
    """
    if lam < 4.0 * space.resolution:
        message = f"lambda = {lam:g} is below resolution (needs >= 4 * {space.resolution:g})"
        logger.error(message)
        raise ValueError(message)

    local = LocalizedKernel(kernel, lam, part="local")
    tail = LocalizedKernel(kernel, lam, part="tail")

    trend = tail_norm_trend(tail, space, t_min=t_min, n_rows=n_rows)
    tail_norm = trend[-1]["norm"]
    if len(trend) >= 2:
        previous = trend[-2]["norm"]
        if tail_norm > (1.0 + DIVERGENCE_GROWTH) * previous and tail_norm > 1e-12:
            message = (
                f"Tail norm of {kernel.kind} keeps growing as t decreases "
                f"({previous:.4g} -> {tail_norm:.4g} over the last octave)"
            )
            logger.error(message)
            raise CertificationError(message, witnesses=trend)

    logger.info(f"Split {kernel.kind} at lambda = {lam:g}: tail norm {tail_norm:.4g}")
    return local, tail, float(tail_norm)
