from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .. import logger
from ..exceptions import CertificationError
from ..kernels import Kernel
from ..maximal import grand_maximal, holder_cutoff, radial_maximal
from ..space import DiscreteSpace, Field
from ..utilities import generator, parallel_map
from .ledger import ConstantLedger

PROFILES = ("triangle", "raised_cosine", "envelope")


@dataclass
class MajorizationReport:
    E: float
    p: float
    ratios: list
    per_sample: list = field(default_factory=list)
    skipped: int = 0
    mode: str = "family"

    def to_dict(self) -> dict:
        return asdict(self)


def random_piecewise_fields(
    space: DiscreteSpace,
    count: int,
    seed: int = 0,
    n_pieces: int = 8,
) -> list:
    """
    Fields constant on the cells of `n_pieces` random sites (nearest-site
    partition) with standard normal values, one generator stream per field.
    """
    out = []
    for k in range(count):
        rng = generator(seed, "piecewise", k)
        sites = rng.choice(space.n_points, size=min(n_pieces, space.n_points), replace=False)
        owner = np.argmin(space.dist_rows(sites), axis=0)
        values = rng.standard_normal(sites.size)
        out.append(Field(values[owner], space))
    return out


def cutoff_family(
    space: DiscreteSpace,
    center: int,
    gamma: float,
    radii: Sequence[float] = (1.0,),
    profiles: Sequence[str] = PROFILES,
) -> list:
    """Hoelder cutoffs at (center, r) for every radius and profile, as (radius, Field) pairs."""
    out = []
    for ri in radii:
        if not 2.0 * space.resolution <= ri <= 1.0:
            message = f"Cutoff radius {ri:g} outside [2 * resolution, 1]"
            logger.error(message)
            raise ValueError(message)
        for profilei in profiles:
            out.append((float(ri), holder_cutoff(space, center, ri, gamma, profilei)))
    return out


def global_maximal_at(space: DiscreteSpace, g: np.ndarray, x: int) -> float:
    """sup over every ball centered at x of the average of |g| (exact over the distinct radii)."""
    d = space.dist_rows([x])[0]
    order = np.argsort(d, kind="stable")
    d_sorted = d[order]
    cum_w = np.cumsum(space.weights[order])
    cum_g = np.cumsum(np.abs(g[order]) * space.weights[order])
    last = np.flatnonzero(np.append(np.diff(d_sorted) > 0, True))
    return float(np.max(cum_g[last] / cum_w[last]))


def majorization_check(
    cutoffs: Sequence,
    fields: Sequence[Field],
    kernel: Kernel,
    ledger: ConstantLedger,
    basepoint: Optional[int] = None,
    t_min: Optional[float] = None,
    grand: Optional[str] = None,
) -> MajorizationReport:
    """
    Empirical E in |int phi f dm| <= E (M((K*f)^p)(o))^{1/p}.

    For each field f the numerator is the largest pairing over `cutoffs`
    ((radius, Field) pairs centered at o, radius <= 1), or the grand
    maximal value at o when `grand` names a method ("lp_exact" or
    "candidate_family"). M is the maximal function over all radii at o
    and p = 1/(1+rho) comes from the ledger. The kernel is normalized by
    the ledger's scale.

    Raises
    ------
    CertificationError
        K*f vanishes identically while some pairing does not.
    """
    if len(fields) == 0:
        message = "majorization_check needs at least one field"
        logger.error(message)
        raise ValueError(message)
    space = fields[0].space
    if basepoint is None:
        basepoint = space.default_basepoint()
    p = ledger.p
    scaled = kernel.with_scale(ledger.scale)
    radii = sorted({float(ri) for ri, _ in cutoffs})

    def _one(k: int) -> dict:
        fk = fields[k]
        if grand is not None:
            numerator = float(
                grand_maximal(space, fk, ledger.gamma, method=grand, points=[basepoint], radii=radii or None).values[0]
            )
        else:
            numerator = max((abs(float(np.dot(phii.values, fk.values * space.weights))) for _, phii in cutoffs), default=0.0)
        star = radial_maximal(scaled, fk, t_min=t_min).values
        denominator = global_maximal_at(space, star**p, basepoint) ** (1.0 / p)
        return dict(sample=k, numerator=numerator, denominator=float(denominator))

    per_sample = parallel_map(_one, range(len(fields)))

    ratios = []
    skipped = 0
    degenerate = []
    for rowi in per_sample:
        if rowi["denominator"] == 0:
            if rowi["numerator"] > 0:
                degenerate.append(rowi["sample"])
            skipped += 1
            rowi["ratio"] = float("nan")
            continue
        rowi["ratio"] = rowi["numerator"] / rowi["denominator"]
        ratios.append(rowi["ratio"])

    if degenerate:
        message = f"K*f vanishes while the pairing does not for samples {degenerate[:20]}"
        logger.error(message)
        raise CertificationError(message, witnesses=degenerate[:20])

    E = max(ratios) if ratios else 0.0
    logger.info(f"Majorization: E_emp = {E:.4g} over {len(ratios)} fields (p = {p:.4f}, {skipped} skipped)")
    for rowi in per_sample:
        if not np.isfinite(rowi["ratio"]):
            rowi["ratio"] = str(rowi["ratio"])
    return MajorizationReport(
        E=float(E),
        p=float(p),
        ratios=ratios,
        per_sample=per_sample,
        skipped=skipped,
        mode="family" if grand is None else f"grand:{grand}",
    )


def relative_change(coarse: float, fine: float) -> float:
    """|fine - coarse| / coarse (inf when coarse is 0 and fine is not)."""
    if coarse == 0:
        return 0.0 if fine == 0 else float("inf")
    return abs(fine - coarse) / abs(coarse)
