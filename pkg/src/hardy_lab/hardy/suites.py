from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np
from tqdm import tqdm

from .. import config, logger
from ..kernels import Kernel
from ..maximal import radial_maximal
from ..space import DiscreteSpace, Field, in_ball
from ..utilities import parallel_map
from .atoms import FLAVORS, Atom, random_atom, validate_atom

#   K*a beyond B(c, r + lam) below this share of its max counts as zero
SUPPORT_TOL = 1e-12


def hardy_norm_estimate(f: Field, kernel: Kernel, t_min: Optional[float] = None) -> tuple:
    """(||f||_1 + ||K*f||_1, {"l1": ..., "maximal_l1": ...})."""
    l1 = f.norm(1.0)
    if l1 == 0:
        return 0.0, dict(l1=0.0, maximal_l1=0.0)
    maximal_l1 = radial_maximal(kernel, f, t_min=t_min).field.norm(1.0)
    return float(l1 + maximal_l1), dict(l1=float(l1), maximal_l1=float(maximal_l1))


def complement_shape(r: float, lam: float, gamma: float) -> float:
    """r^gamma int_{2r}^{2 lam} u^{-1-gamma} du (0 when 2r >= 2 lam)."""
    if r >= lam:
        return 0.0
    return float(r**gamma * ((2.0 * r) ** (-gamma) - (2.0 * lam) ** (-gamma)) / gamma)


def tail_contribution(tail: Kernel, a: Atom, tail_norm: float, t_min: Optional[float] = None) -> dict:
    """||T* a||_1 for the tail T of a split kernel against tail_norm ||a||_1."""
    value = radial_maximal(tail, a.values, t_min=t_min).field.norm(1.0)
    bound = tail_norm * a.values.norm(1.0)
    return dict(value=float(value), bound=float(bound), ok=bool(value <= bound * (1.0 + 1e-9) + 1e-14))


@dataclass
class AtomSuiteReport:
    count: int
    scale: float
    lam: float
    max_total: dict = field(default_factory=dict)
    complement_constant: float = 0.0
    complement_by_radius: list = field(default_factory=list)
    support_ok: bool = True
    tail: dict = field(default_factory=dict)
    rejected: int = 0
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _atom_row(kernel: Kernel, a: Atom, lam: float, t_min: Optional[float]) -> dict:
    space = a.space
    star = radial_maximal(kernel, a.values, t_min=t_min).values
    d = space.dist_rows([a.center])[0]
    w = space.weights
    near = in_ball(d, 5.0 * a.radius)
    total = float(np.dot(star, w))
    inner = float(np.dot(star[near], w[near]))

    support_ok = True
    if np.isfinite(lam):
        outside = ~in_ball(d, a.radius + lam)
        support_ok = not np.any(star[outside] > SUPPORT_TOL * max(star.max(), 1e-300))
    return dict(
        flavor=a.flavor,
        center=int(a.center),
        radius=float(a.radius),
        total=total,
        inner=inner,
        complement=total - inner,
        support_ok=bool(support_ok),
    )


def atom_maximal_suite(
    kernel: Kernel,
    space: DiscreteSpace,
    count: int,
    s: float,
    seed: Optional[int] = None,
    flavors: Sequence[str] = FLAVORS,
    lam: Optional[float] = None,
    tail: Optional[Kernel] = None,
    tail_norm: Optional[float] = None,
    t_min: Optional[float] = None,
) -> AtomSuiteReport:
    """
    ||K*a||_1 over `count` random atoms of each flavor at scale s.

    Each total is split into the part on 5B and the part off it. For
    standard atoms the off part is compared with the shape
    r_B^gamma int_{2 r_B}^{2 lam} u^{-1-gamma} du and the fitted constant
    is reported together with the largest ratio per radius octave. For a
    lam-local kernel every K*a must vanish beyond B(c_B, r_B + lam). With
    `tail` and `tail_norm`, each atom's tail contribution is checked
    against tail_norm ||a||_1.
    """
    if seed is None:
        seed = config.seed
    if lam is None:
        lam = kernel.support
    gamma = kernel.gamma

    atoms = [random_atom(space, s, seed=seed, index=k, flavor=flavori) for flavori in flavors for k in range(count)]
    verdicts = [validate_atom(ai.values, ai.center, ai.radius, ai.scale, ai.p) for ai in atoms]
    rejected = sum(not vi.ok for vi in verdicts)
    if rejected:
        logger.warning(f"{rejected} generated atoms failed validation")

    def _one(a: Atom) -> dict:
        row = _atom_row(kernel, a, lam, t_min)
        if tail is not None and tail_norm is not None:
            row["tail"] = tail_contribution(tail, a, tail_norm, t_min=t_min)
        return row

    rows = parallel_map(_one, tqdm(atoms, disable=not config.progress, desc="atoms"))

    max_total = {}
    for flavori in flavors:
        totals = [ri["total"] for ri in rows if ri["flavor"] == flavori]
        if totals:
            max_total[flavori] = float(max(totals))

    constant = 0.0
    by_octave = {}
    for ri in rows:
        if ri["flavor"] != "standard" or not np.isfinite(lam):
            continue
        shape = complement_shape(ri["radius"], lam, gamma)
        if shape <= 0:
            continue
        ratio = ri["complement"] / shape
        ri["complement_ratio"] = float(ratio)
        constant = max(constant, ratio)
        octave = int(np.floor(np.log2(ri["radius"])))
        by_octave[octave] = max(by_octave.get(octave, 0.0), ratio)

    tail_summary = {}
    if tail is not None and tail_norm is not None:
        tail_summary = dict(
            tail_norm=float(tail_norm),
            max_value=float(max(ri["tail"]["value"] for ri in rows)),
            ok=all(ri["tail"]["ok"] for ri in rows),
        )

    report = AtomSuiteReport(
        count=int(count),
        scale=float(s),
        lam=float(lam) if np.isfinite(lam) else float("inf"),
        max_total=max_total,
        complement_constant=float(constant),
        complement_by_radius=[dict(octave=ki, max_ratio=vi) for ki, vi in sorted(by_octave.items())],
        support_ok=all(ri["support_ok"] for ri in rows),
        tail=tail_summary,
        rejected=int(rejected),
        rows=rows,
    )
    logger.info(
        "Atom suite: "
        + ", ".join(f"max ||K*a||_1 = {vi:.4g} ({ki})" for ki, vi in max_total.items())
        + f", complement constant {constant:.4g}"
    )
    return report
