from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
import polars as pl

from .. import logger
from ..space import DiscreteSpace, Field, in_ball
from ..utilities import generator

FLAVORS = ("standard", "global")

#   relative tolerance on the cancellation condition (times ||a||_1)
QUAD_TOL = 1e-10

#   random atoms are scaled to this share of the size bound
SIZE_FILL = 0.995

_REL = 1e-12


def conjugate(p: float) -> float:
    if p == np.inf:
        return 1.0
    if p <= 1:
        message = f"Atom exponent p must lie in (1, inf] (got {p})"
        logger.error(message)
        raise ValueError(message)
    return p / (p - 1.0)


def lp_norm(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    if p == np.inf:
        return float(np.max(np.abs(values), initial=0.0))
    return float(np.sum(np.abs(values) ** p * weights) ** (1.0 / p))


@dataclass
class Verdict:
    kind: str
    reasons: list = field(default_factory=list)
    size_margin: float = 0.0
    mean: float = 0.0
    mean_tolerance: float = 0.0

    @property
    def ok(self) -> bool:
        return self.kind != "reject"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Atom:
    """p-atom at scale s supported in the closed ball B(center, radius)."""

    values: Field
    center: int
    radius: float
    scale: float
    p: float = np.inf
    flavor: str = "standard"

    @property
    def space(self) -> DiscreteSpace:
        return self.values.space

    @property
    def ball_measure(self) -> float:
        return self.space.ball_measure(self.center, self.radius)

    def to_frame(self) -> pl.DataFrame:
        support = self.values.support()
        return pl.DataFrame({"point_id": support, "value": self.values.values[support]})

    def sidecar(self) -> dict:
        verdict = validate_atom(self.values, self.center, self.radius, self.scale, self.p)
        return dict(
            kind=type(self).__name__.lower(),
            center=int(self.center),
            radius=float(self.radius),
            scale=float(self.scale),
            p="inf" if self.p == np.inf else float(self.p),
            flavor=self.flavor,
            verdict=verdict.to_dict(),
        )


@dataclass(frozen=True, eq=False)
class Ion(Atom):
    """p-ion: size condition of an atom and |int g| <= radius."""

    flavor: str = "ion"

    def sidecar(self) -> dict:
        out = super().sidecar()
        out["verdict"] = validate_ion(self.values, self.center, self.radius, self.scale, self.p).to_dict()
        return out


def _common_checks(candidate: Field, center: int, radius: float, p: float) -> tuple:
    space = candidate.space
    values = candidate.values
    inside = in_ball(space.dist_rows([center])[0], radius)
    reasons = []
    if np.any(values[~inside] != 0):
        reasons.append("support: nonzero values outside the ball")

    measure = float(space.weights[inside].sum())
    limit = measure ** (-1.0 / conjugate(p))
    norm = lp_norm(values, space.weights, p)
    margin = limit - norm
    if norm > limit * (1.0 + _REL):
        reasons.append(f"size: ||a||_p = {norm:.6g} exceeds m(B)^(-1/p') = {limit:.6g}")

    mean = float(np.dot(values, space.weights))
    tolerance = QUAD_TOL * lp_norm(values, space.weights, 1.0)
    return reasons, margin, mean, tolerance


def validate_atom(candidate: Field, center: int, radius: float, s: float, p: float = np.inf) -> Verdict:
    """
    Classify a candidate as a standard atom, a global atom, or neither.

    Standard: support in B, size bound, radius <= s, |int a| <= 1e-10 ||a||_1.
    Global: support in B, size bound, radius == s.
    """
    reasons, margin, mean, tolerance = _common_checks(candidate, center, radius, p)

    standard = []
    if radius > s * (1.0 + _REL):
        standard.append(f"standard: radius {radius:g} exceeds scale {s:g}")
    if abs(mean) > tolerance:
        standard.append(f"standard: mean {mean:.3g} exceeds tolerance {tolerance:.3g}")

    global_ = []
    if abs(radius - s) > _REL * s:
        global_.append(f"global: radius {radius:g} differs from scale {s:g}")

    if not reasons and not standard:
        kind = "standard"
    elif not reasons and not global_:
        kind = "global"
    else:
        kind = "reject"
    return Verdict(
        kind=kind,
        reasons=reasons + standard + global_ if kind == "reject" else [],
        size_margin=float(margin),
        mean=mean,
        mean_tolerance=tolerance,
    )


def validate_ion(candidate: Field, center: int, radius: float, s: float, p: float = np.inf) -> Verdict:
    """Support in B, size bound, radius <= s and |int g| <= radius (+ 1e-10 ||g||_1)."""
    reasons, margin, mean, tolerance = _common_checks(candidate, center, radius, p)
    if radius > s * (1.0 + _REL):
        reasons.append(f"scale: radius {radius:g} exceeds scale {s:g}")
    if abs(mean) > radius + tolerance:
        reasons.append(f"mean: |int g| = {abs(mean):.6g} exceeds radius {radius:g}")
    return Verdict(
        kind="reject" if reasons else "ion",
        reasons=reasons,
        size_margin=float(margin),
        mean=mean,
        mean_tolerance=tolerance,
    )


def _axis_offset(space: DiscreteSpace, center: int) -> np.ndarray:
    if space.coords is None:
        message = "Dipole atoms need a space with coordinates"
        logger.error(message)
        raise ValueError(message)
    offset = space.coords[:, 0] - space.coords[center, 0]
    if space.topology == "torus":
        offset = (offset + 0.5 * space.period) % space.period - 0.5 * space.period
    return offset


def dipole_atom(space: DiscreteSpace, center: int, r: float, s: Optional[float] = None) -> Atom:
    """
    c (1_R / m(R) - 1_L / m(L)) on the ball, with R = {0 <= offset < r} and
    L = {-r <= offset < 0} along the first axis and c = min(m(R), m(L)) / m(B),
    so the mean is zero and the sup is at most 1 / m(B).
    """
    if s is None:
        s = r
    inside = in_ball(space.dist_rows([center])[0], r)
    offset = _axis_offset(space, center)
    right = inside & (offset >= 0) & (offset < r)
    left = inside & (offset >= -r) & (offset < 0)
    if not np.any(left) or not np.any(right):
        message = f"Ball of radius {r:g} at {center} has an empty half"
        logger.error(message)
        raise ValueError(message)
    w = space.weights
    m_right, m_left = float(w[right].sum()), float(w[left].sum())
    c = min(m_right, m_left) / float(w[inside].sum())
    values = c * (right / m_right - left / m_left)
    return Atom(Field(values, space), int(center), float(r), float(s), np.inf, "standard")


def indicator_atom(space: DiscreteSpace, center: int, r: float, s: Optional[float] = None) -> Atom:
    """1_B / m(B): a global atom when r equals the scale."""
    if s is None:
        s = r
    inside = in_ball(space.dist_rows([center])[0], r)
    values = inside / float(space.weights[inside].sum())
    flavor = "global" if abs(r - s) <= _REL * s else "standard"
    return Atom(Field(values, space), int(center), float(r), float(s), np.inf, flavor)


def random_atom(
    space: DiscreteSpace,
    s: float,
    seed: int = 0,
    index: int = 0,
    flavor: str = "standard",
    r_min: Optional[float] = None,
    p: float = np.inf,
) -> Atom:
    """
    Random atom at scale s from stream (seed, "atom", flavor, index).

    Standard atoms take a radius log-uniform in [r_min, s] (r_min defaults
    to 4 * resolution) and zero-mean normal values; global atoms take
    radius s and positive values. Both are scaled to 99.5% of the size
    bound.
    """
    if flavor not in FLAVORS:
        message = f"Unknown atom flavor '{flavor}' (expected one of {FLAVORS})"
        logger.error(message)
        raise ValueError(message)
    if r_min is None:
        r_min = 4.0 * space.resolution
    if s < r_min:
        message = f"Atom scale {s:g} is below the smallest radius {r_min:g}"
        logger.error(message)
        raise ValueError(message)

    rng = generator(seed, "atom", flavor, index)
    center = int(rng.integers(space.n_points))
    if flavor == "global":
        radius = float(s)
    else:
        radius = float(np.exp(rng.uniform(np.log(r_min), np.log(s))))

    inside = np.flatnonzero(in_ball(space.dist_rows([center])[0], radius))
    w = space.weights[inside]
    if flavor == "global":
        raw = rng.uniform(0.5, 1.5, size=inside.size)
    else:
        raw = rng.standard_normal(inside.size)
        raw -= np.dot(raw, w) / w.sum()

    values = np.zeros(space.n_points)
    norm = lp_norm(raw, w, p)
    if norm > 0:
        limit = float(w.sum()) ** (-1.0 / conjugate(p))
        values[inside] = SIZE_FILL * limit * raw / norm
    return Atom(Field(values, space), center, radius, float(s), float(p), flavor)
