from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import logger
from .metric import DiscreteSpace, Field, lipschitz_constant
from .nets import separated_set


def taper(r: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """1 on [0, inner], 0 beyond outer, raised-cosine in between."""
    r = np.asarray(r, dtype=float)
    s = np.clip((r - inner) / (outer - inner), 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * s))


@dataclass(frozen=True, eq=False)
class Patchwork:
    """Separated centers with a subordinate partition of unity and a coloring."""

    centers: np.ndarray
    colors: list
    cutoffs: np.ndarray
    enlarged: np.ndarray
    kappa: float
    lipschitz: float
    space: DiscreteSpace

    @property
    def n_colors(self) -> int:
        return len(self.colors)

    def cutoff(self, k: int) -> Field:
        return Field(self.cutoffs[k], self.space)

    def enlarged_cutoff(self, k: int) -> Field:
        return Field(self.enlarged[k], self.space)

    def partition_residual(self) -> float:
        return float(np.abs(self.cutoffs.sum(axis=0) - 1.0).max())

    def color_separation(self) -> float:
        """Smallest distance between two centers of the same color (inf if none)."""
        best = np.inf
        for colori in self.colors:
            if len(colori) < 2:
                continue
            d = self.space.dist_rows(colori)[:, colori]
            d = d[~np.eye(len(colori), dtype=bool)]
            best = min(best, float(d.min()))
        return best


def build_patchwork(space: DiscreteSpace, kappa: float) -> Patchwork:
    """
    Maximal kappa/3-separated centers, cutoffs psi(d(., p)) / sum_q psi(d(., q))
    with psi = 1 on [0, kappa/2] and 0 beyond 3 kappa/4, enlarged cutoffs
    equal to 1 on B_kappa(p) and vanishing beyond 3 kappa/2, and colors by
    repeated extraction of maximal 4 kappa-separated subsets.
    """
    if kappa < 4.0 * space.resolution:
        message = f"kappa = {kappa:g} is below resolution (needs >= 4 * {space.resolution:g})"
        logger.error(message)
        raise ValueError(message)

    everything = np.arange(space.n_points)
    centers = separated_set(space, everything, kappa / 3.0)

    d_centers = space.dist_rows(centers)
    psi = taper(d_centers, kappa / 2.0, 0.75 * kappa)
    cutoffs = psi / psi.sum(axis=0, keepdims=True)
    enlarged = taper(d_centers, kappa, 1.5 * kappa)

    colors = []
    remaining = np.arange(centers.size)
    while remaining.size:
        picked_points = separated_set(space, centers[remaining], 4.0 * kappa)
        picked = remaining[np.isin(centers[remaining], picked_points)]
        colors.append([int(centers[k]) for k in picked])
        remaining = remaining[~np.isin(remaining, picked)]

    lipschitz = 0.0
    for row in cutoffs:
        lipschitz = max(lipschitz, lipschitz_constant(row, space, radius=kappa))

    logger.info(f"Patchwork: {centers.size} centers, {len(colors)} colors at kappa = {kappa:g}")

    cutoffs.flags.writeable = False
    enlarged.flags.writeable = False
    return Patchwork(
        centers=centers,
        colors=colors,
        cutoffs=cutoffs,
        enlarged=enlarged,
        kappa=float(kappa),
        lipschitz=float(lipschitz),
        space=space,
    )
