from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

from .. import logger
from ..kernels import FittedConstants, Kernel
from ..space import Field, Patchwork, lipschitz_constant
from ..utilities import t_grid
from .operators import radial_maximal, riesz_potential


@dataclass
class CommutationReport:
    max_excess: float
    per_cutoff: list
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def lipschitz_commutation_excess(
    kernel: Kernel,
    fitted: FittedConstants,
    patchwork: Patchwork,
    f: Field,
    lam: Optional[float] = None,
    cutoffs: Optional[Sequence[int]] = None,
    t_min: Optional[float] = None,
) -> CommutationReport:
    """
    Check K*(phi_p f) <= |phi_p| K*f + L_p C1 I_lam f pointwise for patchwork
    cutoffs phi_p, with L_p the measured Lipschitz constant of phi_p and C1
    the fitted upper constant of the (lam-local) kernel.
    """
    space = f.space
    if lam is None:
        lam = kernel.support
    if not np.isfinite(lam):
        message = "Lipschitz commutation needs a kernel with finite support"
        logger.error(message)
        raise ValueError(message)
    if cutoffs is None:
        cutoffs = range(len(patchwork.centers))

    times = t_grid(space.resolution, t_min=t_min)
    star = radial_maximal(kernel, f, times=times).values
    riesz = riesz_potential(space, f, lam).values

    per_cutoff = []
    worst = -np.inf
    for k in cutoffs:
        phi = patchwork.cutoffs[k]
        L = lipschitz_constant(phi, space)
        left = radial_maximal(kernel, Field(phi * f.values, space), times=times).values
        right = np.abs(phi) * star + L * fitted.C1 * riesz
        scale = max(float(np.abs(right).max()), 1.0)
        excess = float((left - right).max()) / scale
        per_cutoff.append(dict(center=int(patchwork.centers[k]), lipschitz=float(L), excess=excess))
        worst = max(worst, excess)

    holds = bool(worst <= 1e-10)
    if not holds:
        logger.warning(f"Lipschitz commutation violated (relative excess {worst:.3g})")
    return CommutationReport(max_excess=float(worst), per_cutoff=per_cutoff, holds=holds)


@dataclass
class NonvanishingReport:
    c1: float
    c2: float
    min_ratio: float
    n_pairs: int
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def nonvanishing_constants(c: float, gamma: float) -> tuple:
    """(c1, c2) = (c/2, min((c/2)^{1/gamma}, 1/4))."""
    return 0.5 * c, min((0.5 * c) ** (1.0 / gamma), 0.25)


def nonvanishing_margin(
    kernel: Kernel,
    fitted: FittedConstants,
    space,
    n_rows: int = 32,
    t_min: Optional[float] = None,
) -> NonvanishingReport:
    """
    min of s K(t,x,y) t^D / c1 over sampled (t, x) and every y with
    d(x,y) <= c2 t; at least 1 when the lower kernel bound holds.
    """
    c1, c2 = nonvanishing_constants(fitted.c, fitted.gamma)
    D = kernel.dimension
    scaled = kernel.with_scale(fitted.scale)
    if n_rows >= space.n_points:
        rows = np.arange(space.n_points)
    else:
        rows = np.unique(np.round(np.linspace(0, space.n_points - 1, n_rows)).astype(int))
    d = space.dist_rows(rows)

    min_ratio = np.inf
    n_pairs = 0
    for ti in t_grid(space.resolution, t_min=t_min):
        near = d <= c2 * ti * (1.0 + 1e-12)
        if not np.any(near):
            continue
        K = scaled.evaluate(space, ti, rows)
        ratio = K[near] * ti**D / c1
        min_ratio = min(min_ratio, float(ratio.min()))
        n_pairs += int(near.sum())

    holds = bool(n_pairs > 0 and min_ratio >= 1.0 - 1e-12)
    return NonvanishingReport(c1=float(c1), c2=float(c2), min_ratio=float(min_ratio), n_pairs=n_pairs, holds=holds)


def pointwise_domination_deficit(
    kernel: Kernel,
    fitted: FittedConstants,
    f: Field,
    t_min: Optional[float] = None,
) -> tuple:
    """
    epsilon_grid = || (c |f| - (sK)* f)_+ ||_1 and the deficit field itself.
    """
    scaled = kernel.with_scale(fitted.scale)
    star = radial_maximal(scaled, f, t_min=t_min).values
    deficit = np.maximum(fitted.c * np.abs(f.values) - star, 0.0)
    field = Field(deficit, f.space)
    return field.integral(), field
