from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .. import logger
from ..utilities import ahlfors_radii, chunks, parallel_map
from .metric import BALL_TOL, ROW_CHUNK, DiscreteSpace

MAX_WITNESSES = 20


@dataclass
class AhlforsReport:
    dimension: float
    radii: list
    fitted_A: float
    worst_ratio_low: float
    worst_ratio_high: float
    violations: list = field(default_factory=list)
    n_violations: int = 0
    warnings: list = field(default_factory=list)
    certified: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class _ScanPartial:
    low: float
    high: float
    n_violations: int
    witnesses: list


def verify_ahlfors(
    space: DiscreteSpace,
    D: float,
    radii: Optional[Sequence[float]] = None,
) -> AhlforsReport:
    """
    Fit the smallest A with A^-1 r^D <= m(B(x,r)) <= A r^D over every center
    and the sampled radii.

    A sampled ball that is empty, or that already holds the whole space,
    counts as a violation: the measure of such a ball can no longer follow
    r^D. Radii at or below twice the resolution are dropped with a warning.

    Parameters
    ----------
    space : DiscreteSpace
    D : float
        Candidate dimension.
    radii : list of float, optional
        Radii to sample. Defaults to a 2^{1/4} grid inside
        (2*resolution, diameter/2).

    Returns
    -------
    AhlforsReport
    """
    warnings = []
    resolution = space.resolution
    if radii is None:
        radii = ahlfors_radii(resolution, space.diameter)
    radii = np.sort(np.asarray(radii, dtype=float))

    below = radii <= 2.0 * resolution
    if np.any(below) and resolution > 0:
        message = f"Dropping {int(below.sum())} radii at or below resolution 2*{resolution:g}"
        logger.warning(message)
        warnings.append(message)
        radii = radii[~below]
    if space.diameter > 0 and np.any(radii >= space.diameter / 2.0):
        message = "Some radii reach diameter/2; saturated balls will be reported"
        logger.warning(message)
        warnings.append(message)

    if radii.size == 0:
        message = "No admissible radii to sample"
        logger.warning(message)
        warnings.append(message)
        return AhlforsReport(
            dimension=float(D),
            radii=[],
            fitted_A=float("inf"),
            worst_ratio_low=0.0,
            worst_ratio_high=float("inf"),
            warnings=warnings,
            certified=False,
        )

    total = space.total_measure
    scale = radii ** D

    def _scan(block: slice) -> _ScanPartial:
        d_raw = space.dist_rows(block)
        order = np.argsort(d_raw, axis=1, kind="stable")
        d_block = np.take_along_axis(d_raw, order, axis=1)
        cum_w = np.cumsum(space.weights[order], axis=1)
        n = space.n_points

        counts = np.stack(
            [np.searchsorted(rowi, radii * (1.0 + BALL_TOL), side="right") for rowi in d_block]
        )
        measures = np.where(counts > 0, np.take_along_axis(cum_w, np.maximum(counts - 1, 0), axis=1), 0.0)
        ratios = measures / scale[None, :]

        empty = counts == 0
        saturated = (counts == n) & (measures >= total * (1.0 - 1e-12))
        bad = empty | saturated

        witnesses = []
        for (rowi, coli) in zip(*np.nonzero(bad)):
            if len(witnesses) >= MAX_WITNESSES:
                break
            witnesses.append(
                dict(
                    point=int(np.arange(n)[block][rowi]),
                    radius=float(radii[coli]),
                    kind="empty" if empty[rowi, coli] else "saturated",
                    measure=float(measures[rowi, coli]),
                )
            )

        ok = ~bad
        low = float(ratios[ok].min()) if np.any(ok) else float("inf")
        high = float(ratios[ok].max()) if np.any(ok) else 0.0
        return _ScanPartial(low=low, high=high, n_violations=int(bad.sum()), witnesses=witnesses)

    partials = parallel_map(_scan, list(chunks(space.n_points, ROW_CHUNK)))

    low = min(p.low for p in partials)
    high = max(p.high for p in partials)
    n_violations = sum(p.n_violations for p in partials)
    witnesses = [w for p in partials for w in p.witnesses][:MAX_WITNESSES]

    if np.isfinite(low) and low > 0:
        fitted_A = max(high, 1.0 / low, 1.0)
    else:
        fitted_A = float("inf")

    certified = n_violations == 0 and np.isfinite(fitted_A)
    if not certified:
        logger.warning(
            f"Ahlfors certification failed (D={D:g}, {n_violations} violating (x, r) samples)"
        )

    return AhlforsReport(
        dimension=float(D),
        radii=[float(r) for r in radii],
        fitted_A=float(fitted_A),
        worst_ratio_low=float(low) if np.isfinite(low) else 0.0,
        worst_ratio_high=float(high),
        violations=witnesses,
        n_violations=n_violations,
        warnings=warnings,
        certified=bool(certified),
    )


def certify_space(space: DiscreteSpace, D: Optional[float] = None, radii=None) -> tuple:
    """verify_ahlfors and, on success, the certified copy of the space."""
    if D is None:
        D = space.dimension
    report = verify_ahlfors(space, D, radii)
    if report.certified:
        space = space.with_ahlfors(report.fitted_A, min(report.radii), max(report.radii))
    return space, report
