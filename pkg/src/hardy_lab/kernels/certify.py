from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .. import logger
from ..space import DiscreteSpace, in_ball
from ..utilities import t_grid, parallel_map
from .kernel import Kernel

MAX_WITNESSES = 20

#   upper cap for the on-diagonal constant c = s * C2
LOWER_CAP = 0.999


@dataclass
class FittedConstants:
    """
    Measured local-approximation-of-the-identity constants of a kernel and
    the largest scale s for which s*K meets the unit-constant upper and
    Hoelder bounds.
    """

    kind: str
    dimension: float
    gamma: float
    lam: float
    C1: float
    C2: float
    C3: float
    C4: float
    C3_from_gradient: float
    scale: float
    scale_upper: float
    c: float
    margins: dict = field(default_factory=dict)
    support_ok: bool = True
    witnesses: list = field(default_factory=list)
    sample: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    certified: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        for keyi in ("lam", "C4", "C3_from_gradient", "scale_upper"):
            if not np.isfinite(out[keyi]):
                out[keyi] = str(out[keyi])
        return out


@dataclass
class _TimeScan:
    t: float
    C1: float
    C2: float
    C3: float
    C4: float
    witnesses: list


def _sample_rows(n_points: int, n_rows: int) -> np.ndarray:
    if n_rows >= n_points:
        return np.arange(n_points)
    return np.unique(np.round(np.linspace(0, n_points - 1, n_rows)).astype(int))


def verify_lai(
    kernel: Kernel,
    space: DiscreteSpace,
    gamma: Optional[float] = None,
    lam: Optional[float] = None,
    n_rows: int = 32,
    t_min: Optional[float] = None,
    t_values: Optional[Sequence[float]] = None,
    n_near: int = 8,
) -> FittedConstants:
    """
    Measure the four local-AI conditions over sampled (t, x, y, z).

    For x in an evenly spaced row sample, every y, z among the neighbors
    of y at distance ranks 1..n_near and dyadic ranks beyond, and t on the
    2^{1/8} grid:

        (i)   K(t,x,y) = 0 when d(x,y) > lam
        (ii)  C1 = max K / (t^-D (1 + d/t)^{-D-gamma})
        (iii) C2 = min t^D K(t,x,x)
        (iv)  C3 = max |K(t,x,y) - K(t,x,z)| / (t^-D (d(y,z)/t)^gamma (1 + d(x,y)/t)^{-D-2 gamma})
              over 4 d(y,z) <= t + d(x,y)

    C4 is the same quotient for nearest-neighbor difference quotients
    against t^{-D-1} (1 + d/t)^{-D-1-gamma}, with d the larger of d(x,y)
    and d(x,z); C3_from_gradient = (4/3)^{D+1+gamma} (1/4)^{1-gamma} C4.

    The fitted scale is s = min(1 / max(C1, C3), 0.999 / C2), so s*K meets
    the unit-constant bounds, and c = s*C2. Certified iff (i) holds and
    0 < c < 1.

    Parameters
    ----------
    kernel : Kernel
    space : DiscreteSpace
    gamma : float, optional
        Exponent to certify (defaults to kernel.gamma).
    lam : float, optional
        Support radius (defaults to kernel.support).
    n_rows : int
        Sampled x points.
    t_min : float, optional
        Smallest sampled time (at least 2 * resolution unless set lower).
    t_values : list of float, optional
        Explicit time sample.
    n_near : int
        Nearest ranks used for the z sample.

    Returns
    -------
    FittedConstants
    """
    if gamma is None:
        gamma = kernel.gamma
    if lam is None:
        lam = kernel.support
    D = kernel.dimension
    warnings = []

    if not space.is_certified:
        message = "Kernel certification on a space without an Ahlfors certificate"
        logger.warning(message)
        warnings.append(message)
    elif abs(space.dimension - D) > 1e-12:
        message = f"Kernel dimension {D:g} differs from the space dimension {space.dimension:g}"
        logger.warning(message)
        warnings.append(message)

    resolution = space.resolution
    if t_values is not None:
        times = np.sort(np.asarray(t_values, dtype=float))
    elif t_min is not None and t_min < 2.0 * resolution:
        times = t_grid(0.0, t_min=t_min)
    else:
        times = t_grid(resolution, t_min=t_min)
    if times.size and times[0] < 2.0 * resolution:
        message = f"t_min = {times[0]:g} is below 2 * resolution ({2.0 * resolution:g})"
        logger.warning(message)
        warnings.append(message)

    rows = _sample_rows(space.n_points, n_rows)
    d_xy = space.dist_rows(rows)
    neighbors = space.neighbor_sample(n_near)
    d_yz = space.pair_distances(
        np.repeat(np.arange(space.n_points), neighbors.shape[1]),
        neighbors.ravel(),
    ).reshape(neighbors.shape)
    nearest = d_yz <= resolution * (1.0 + 1e-9)
    diagonal = (np.arange(rows.size), rows)

    def _scan(t: float) -> _TimeScan:
        K = kernel.evaluate(space, t, rows)
        u = d_xy / t

        upper = t ** (-D) * (1.0 + u) ** (-D - gamma)
        C1 = float((K / upper).max())
        C2 = float(t**D * K[diagonal].min())

        witnesses = []
        if np.isfinite(lam):
            outside = (K > 0) & ~in_ball(d_xy, lam)
            for (ri, yi) in zip(*np.nonzero(outside)):
                if len(witnesses) >= MAX_WITNESSES:
                    break
                witnesses.append(
                    dict(t=float(t), x=int(rows[ri]), y=int(yi), distance=float(d_xy[ri, yi]), value=float(K[ri, yi]))
                )

        K_z = K[:, neighbors]
        diff = np.abs(K[:, :, None] - K_z)
        in_range = 4.0 * d_yz[None, :, :] <= (t + d_xy)[:, :, None] * (1.0 + 1e-12)
        holder = (
            t ** (-D)
            * (d_yz[None, :, :] / t) ** gamma
            * (1.0 + u[:, :, None]) ** (-D - 2.0 * gamma)
        )
        C3 = float(np.max(np.where(in_range, diff / holder, 0.0), initial=0.0))

        C4 = np.nan
        if np.any(nearest):
            d_far = np.maximum(d_xy[:, :, None], d_xy[:, neighbors])
            gradient = t ** (-D - 1.0) * (1.0 + d_far / t) ** (-D - 1.0 - gamma)
            quotient = diff / np.where(nearest, d_yz, np.inf)[None, :, :]
            C4 = float(np.max(np.where(nearest[None, :, :], quotient / gradient, 0.0)))

        return _TimeScan(t=float(t), C1=C1, C2=C2, C3=C3, C4=C4, witnesses=witnesses)

    scans = parallel_map(_scan, list(times))

    C1 = max(si.C1 for si in scans)
    C2 = min(si.C2 for si in scans)
    C3 = max(si.C3 for si in scans)
    C4_values = [si.C4 for si in scans if np.isfinite(si.C4)]
    C4 = max(C4_values) if C4_values else float("nan")
    C3_from_gradient = gradient_holder_constant(C4, D, gamma) if np.isfinite(C4) else float("nan")
    witnesses = [w for si in scans for w in si.witnesses][:MAX_WITNESSES]
    support_ok = len(witnesses) == 0
    if not support_ok:
        logger.warning(f"Kernel support exceeds lambda = {lam:g} ({len(witnesses)}+ witnesses)")

    largest = max(C1, C3)
    scale_upper = 1.0 / C1 if C1 > 0 else float("inf")
    scale = 1.0 / largest if largest > 0 else 1.0
    if C2 > 0:
        scale = min(scale, LOWER_CAP / C2)
    c = scale * max(C2, 0.0)

    certified = support_ok and 0 < c < 1 and np.isfinite(C1) and np.isfinite(C3)
    if not certified:
        logger.warning(f"Kernel {kernel.kind} not certified (c = {c:.4g}, support ok = {support_ok})")

    return FittedConstants(
        kind=kernel.kind,
        dimension=float(D),
        gamma=float(gamma),
        lam=float(lam),
        C1=float(C1),
        C2=float(C2),
        C3=float(C3),
        C4=float(C4),
        C3_from_gradient=float(C3_from_gradient),
        scale=float(scale),
        scale_upper=float(scale_upper),
        c=float(c),
        margins=dict(upper=float(scale * C1), holder=float(scale * C3), lower=float(c)),
        support_ok=bool(support_ok),
        witnesses=witnesses,
        sample=dict(
            n_rows=int(rows.size),
            n_times=int(times.size),
            t_min=float(times[0]),
            t_max=float(times[-1]),
            n_z=int(neighbors.shape[1]),
        ),
        warnings=warnings,
        certified=bool(certified),
    )


def gradient_holder_constant(C4: float, n: float, gamma: float) -> float:
    """Hoelder constant implied by a gradient bound with constant C4."""
    return (4.0 / 3.0) ** (n + 1.0 + gamma) * 0.25 ** (1.0 - gamma) * C4


def lip_range_constant(C1: float, C3: float, n: float, gamma: float, kappa: float) -> float:
    """
    Hoelder constant over the range 4 d(y,z) <= t + d(x,y), given the bound
    on the narrower range kappa d(y,z) <= t + min(d(x,y), d(x,z)).
    """
    return max(C3, C1 * (1.0 + (4.0 / 3.0) ** (n + gamma)) * (4.0 * kappa / 3.0) ** gamma)


def cutoff_constants(C1: float, C3: float, L: float, lam: float) -> tuple:
    """(C1', C3') of Phi(x,y) K(t,x,y) for a cutoff with |Phi| <= L and Hoelder constant L."""
    return C1 * L, L * (C1 * (2.0 + 2.0 * lam) + C3)
