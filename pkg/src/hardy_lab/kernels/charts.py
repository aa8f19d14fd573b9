from __future__ import annotations

from dataclasses import dataclass, field, asdict
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .. import logger
from ..exceptions import PatchOverflowError
from ..space import DiscreteSpace, build_space, taper
from ..utilities import generator
from .certify import FittedConstants, verify_lai
from .kernel import Kernel

#   pairs sampled for the bi-Lipschitz check on larger patches
MAX_PATCH_PAIRS = 20_000


def zeta(r: np.ndarray, R0: float, Q: float) -> np.ndarray:
    """Reference profile clip(R0/Q - r, 0, 1): 1-Lipschitz, positive at 0, zero beyond R0/Q."""
    return np.clip(R0 / Q - np.asarray(r, dtype=float), 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class Chart:
    """
    Coordinate patch around `center`: `forward` maps source coordinates
    into the target grid and `inverse` maps them back, with
    |X - Y| / Q <= d(x, y) <= Q |X - Y| on B(center, R0).
    """

    source: DiscreteSpace
    target: DiscreteSpace
    center: int
    Q: float
    R0: float
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def __post_init__(self):
        if self.Q < 1:
            message = f"Chart constant Q must be at least 1 (got {self.Q})"
            logger.error(message)
            raise ValueError(message)
        if self.R0 <= 0:
            message = f"Chart radius R0 must be positive (got {self.R0})"
            logger.error(message)
            raise ValueError(message)
        if self.source.coords is None or self.target.topology != "grid":
            message = "Charts need a source with coordinates and a Euclidean grid target"
            logger.error(message)
            raise ValueError(message)

    @cached_property
    def center_image(self) -> np.ndarray:
        return np.asarray(self.forward(self.source.coords[self.center]), dtype=float)

    @cached_property
    def chi(self) -> np.ndarray:
        """Cutoff on the target: 1 on radius R0/(4Q) around the image of the center, 0 beyond R0/(2Q)."""
        r = np.linalg.norm(self.target.coords - self.center_image[None, :], axis=1)
        return taper(r, self.R0 / (4.0 * self.Q), self.R0 / (2.0 * self.Q))

    @cached_property
    def patch(self) -> np.ndarray:
        """Target points where chi > 0."""
        return np.flatnonzero(self.chi > 0)

    @cached_property
    def preimage(self) -> np.ndarray:
        """Source point under each target point of the patch (-1 elsewhere)."""
        out = np.full(self.target.n_points, -1, dtype=int)
        tolerance = 1e-6 * self.target.resolution
        d_center = self.source.dist_rows([self.center])[0]
        for Xi in self.patch:
            X = self.target.coords[Xi]
            x = self.source.nearest(self.inverse(X))
            if np.linalg.norm(self.forward(self.source.coords[x]) - X) > tolerance:
                message = f"Chart {self.name or self.center}: target point {Xi} has no source grid preimage"
                logger.error(message)
                raise PatchOverflowError(message)
            if d_center[x] > self.R0 * (1.0 + 1e-12):
                message = f"Chart {self.name or self.center}: patch leaves B(center, R0)"
                logger.error(message)
                raise PatchOverflowError(message)
            out[Xi] = x
        return out

    def bilipschitz_ratios(self, seed: int = 0) -> tuple:
        """(min, max) of d(x,y) / |X - Y| over sampled pairs of B(center, R0)."""
        ball = self.source.ball(self.center, self.R0)
        if ball.size < 2:
            return 1.0, 1.0
        n_pairs = ball.size * (ball.size - 1) // 2
        if n_pairs <= MAX_PATCH_PAIRS:
            a, b = np.triu_indices(ball.size, k=1)
        else:
            rng = generator(seed, "chart", self.center)
            a, b = rng.integers(0, ball.size, size=(2, MAX_PATCH_PAIRS))
            keep = a != b
            a, b = a[keep], b[keep]
        x, y = ball[a], ball[b]
        d = self.source.pair_distances(x, y)
        images = np.asarray(self.forward(self.source.coords[ball]), dtype=float)
        delta = np.linalg.norm(images[a] - images[b], axis=1)
        ratio = d / delta
        return float(ratio.min()), float(ratio.max())

    def validate(self):
        low, high = self.bilipschitz_ratios()
        if low < (1.0 - 1e-9) / self.Q or high > (1.0 + 1e-9) * self.Q:
            message = (
                f"Chart {self.name or self.center} is not {self.Q:g}-bi-Lipschitz "
                f"(sampled ratios in [{low:.4g}, {high:.4g}])"
            )
            logger.error(message)
            raise ValueError(message)
        if np.any(self.preimage[self.patch] < 0):
            message = f"Chart {self.name or self.center}: unresolved patch preimages"
            logger.error(message)
            raise PatchOverflowError(message)


class GluedKernel(Kernel):
    """
    K#(t,X,Y) = Xi(X,Y) K(t, eta^-1 X, eta^-1 Y) + (1 - Xi(X,Y)) S(t,X,Y)
    on the target grid of a chart, with Xi = chi(X) chi(Y) and
    S(t,X,Y) = t^-n zeta(|X - Y| / t).
    """

    kind = "glued"

    def __init__(self, base: Kernel, chart: Chart):
        super().__init__(
            gamma=base.gamma,
            support=chart.R0 / chart.Q,
            dimension=float(chart.target.ambient_dimension),
            params=dict(base=base.kind, Q=chart.Q, R0=chart.R0, center=int(chart.center)),
        )
        self.base = base
        self.chart = chart

    def reference(self, space: DiscreteSpace, t: np.ndarray, rows: np.ndarray) -> np.ndarray:
        tt = t[:, None]
        return tt ** (-self.dimension) * zeta(space.dist_rows(rows) / tt, self.chart.R0, self.chart.Q)

    def _evaluate(self, space: DiscreteSpace, t: np.ndarray, rows: np.ndarray) -> np.ndarray:
        chart = self.chart
        if space is not chart.target:
            message = "Glued kernels are evaluated on their chart's target grid"
            logger.error(message)
            raise ValueError(message)

        chi = chart.chi
        xi = chi[rows][:, None] * chi[None, :]
        out = (1.0 - xi) * self.reference(space, t, rows)

        active = np.flatnonzero(chi[rows] > 0)
        if active.size:
            cols = chart.patch
            preimage = chart.preimage
            K = self.base.evaluate(chart.source, t[active], preimage[rows[active]])
            block = np.ix_(active, cols)
            out[block] += xi[block] * K[:, preimage[cols]]
        return out


def glue_kernel(kernel: Kernel, chart: Chart) -> GluedKernel:
    """
    Transplant `kernel` through `chart` onto the chart's target grid.

    The kernel must be supported within R0 / (8 Q^2) and the chart must pass
    its sampled bi-Lipschitz check. The result is an R0/Q-local kernel.
    """
    limit = chart.R0 / (8.0 * chart.Q**2)
    if not kernel.support <= limit * (1.0 + 1e-12):
        message = f"Kernel support {kernel.support:g} exceeds R0 / (8 Q^2) = {limit:g}"
        logger.error(message)
        raise ValueError(message)
    chart.validate()
    return GluedKernel(kernel, chart)


def identity_chart(space: DiscreteSpace, center: int, R0: float) -> Chart:
    def _same(X):
        return np.asarray(X, dtype=float)

    return Chart(
        source=space,
        target=space,
        center=int(center),
        Q=1.0,
        R0=float(R0),
        forward=_same,
        inverse=_same,
        name=f"identity@{center}",
    )


def dilation_chart(space: DiscreteSpace, center: int, R0: float, factor: float = 2.0) -> Chart:
    """x -> factor * x from a grid onto the dilated grid (Q = factor)."""
    if space.topology != "grid":
        message = "Dilation charts need a grid source"
        logger.error(message)
        raise ValueError(message)
    if factor < 1:
        message = f"Dilation factor must be at least 1 (got {factor})"
        logger.error(message)
        raise ValueError(message)
    low = space.coords.min(axis=0)
    extent = float((space.coords.max(axis=0) - low).max())
    target = build_space(
        "grid",
        dimension=space.ambient_dimension,
        extent=factor * extent,
        spacing=factor * space.spacing,
        origin=float(factor * low[0]),
        name=f"{space.name}x{factor:g}",
    )

    def _forward(X):
        return factor * np.asarray(X, dtype=float)

    def _inverse(X):
        return np.asarray(X, dtype=float) / factor

    return Chart(
        source=space,
        target=target,
        center=int(center),
        Q=float(factor),
        R0=float(R0),
        forward=_forward,
        inverse=_inverse,
        name=f"dilation{factor:g}@{center}",
    )


@dataclass
class GlueReport:
    centers: list
    constants: list = field(default_factory=list)
    spread: dict = field(default_factory=dict)
    consistent: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def glue_over_centers(
    kernel: Kernel,
    charts: Sequence[Chart],
    tolerance: float = 0.20,
    **verify_kwargs,
) -> GlueReport:
    """
    glue_kernel + verify_lai for each chart; reports the relative spread
    max/min - 1 of C1, C2 and C3 across charts (consistent when every
    spread is within `tolerance`).
    """
    if len(charts) == 0:
        message = "glue_over_centers needs at least one chart"
        logger.error(message)
        raise ValueError(message)

    fitted: list[FittedConstants] = []
    for charti in charts:
        glued = glue_kernel(kernel, charti)
        fitted.append(verify_lai(glued, charti.target, **verify_kwargs))

    spread = {}
    for keyi in ("C1", "C2", "C3"):
        values = np.array([getattr(fi, keyi) for fi in fitted])
        if values.min() > 0:
            spread[keyi] = float(values.max() / values.min() - 1.0)
        else:
            spread[keyi] = float("inf") if values.max() > 0 else 0.0

    consistent = all(vi <= tolerance for vi in spread.values()) and all(fi.certified for fi in fitted)
    return GlueReport(
        centers=[int(ci.center) for ci in charts],
        constants=[fi.to_dict() for fi in fitted],
        spread=spread,
        consistent=bool(consistent),
    )
