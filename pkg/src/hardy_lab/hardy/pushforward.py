from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import logger
from ..exceptions import PatchOverflowError
from ..space import DiscreteSpace, Field, build_space, lipschitz_constant
from ..utilities import generator
from .atoms import Atom, Ion, Verdict, conjugate, validate_ion

#   patches up to this size are checked on every pair, larger ones on a sample
MAX_EXACT_PATCH = 2000
MAX_PAIRS = 20_000


@dataclass(frozen=True, eq=False)
class PushforwardSpec:
    """
    Transport from `source` (where atoms live) to `target`.

    `psi[x']` is the source point Psi(x') for each target point x' of the
    patch (-1 outside it), `rho[x']` the density m(Psi(x')) / m'(x') of the
    transported measure, `phi` the multiplier on the source, A the
    bi-Lipschitz constant of Psi and L the common bound on |phi| and its
    Lipschitz constant.
    """

    source: DiscreteSpace
    target: DiscreteSpace
    psi: np.ndarray
    rho: np.ndarray
    phi: Field
    A: float
    L: float

    @property
    def kappa_A(self) -> float:
        """Ahlfors comparison constant of the two spaces, A_source * A_target."""
        if not self.source.is_certified or not self.target.is_certified:
            message = "Pushforward needs Ahlfors-certified source and target spaces"
            logger.error(message)
            raise ValueError(message)
        return float(self.source.ahlfors_constant * self.target.ahlfors_constant)

    def threshold(self, s: float, p: float = np.inf) -> float:
        """max{L/A, L/(A s), L A^{2D/p'} kappa_A^{2/p'}}."""
        q = conjugate(p)
        D = self.source.dimension
        return float(
            max(
                self.L / self.A,
                self.L / (self.A * s),
                self.L * self.A ** (2.0 * D / q) * self.kappa_A ** (2.0 / q),
            )
        )

    def inverse(self) -> np.ndarray:
        """Target point over each source point (-1 when it has none)."""
        out = np.full(self.source.n_points, -1, dtype=int)
        patch = np.flatnonzero(self.psi >= 0)
        out[self.psi[patch]] = patch
        return out

    def bilipschitz_ratios(self) -> tuple:
        """(min, max) of d(Psi x', Psi y') / d'(x', y') over pairs of the patch."""
        patch = np.flatnonzero(self.psi >= 0)
        if patch.size < 2:
            return 1.0, 1.0
        if patch.size <= MAX_EXACT_PATCH:
            a, b = np.triu_indices(patch.size, k=1)
        else:
            rng = generator(0, "pushforward", patch.size)
            a, b = rng.integers(0, patch.size, size=(2, MAX_PAIRS))
            keep = a != b
            a, b = a[keep], b[keep]
        d_target = self.target.pair_distances(patch[a], patch[b])
        d_source = self.source.pair_distances(self.psi[patch[a]], self.psi[patch[b]])
        ratio = d_source / d_target
        return float(ratio.min()), float(ratio.max())

    def check(self):
        low, high = self.bilipschitz_ratios()
        if low < (1.0 - 1e-9) / self.A or high > (1.0 + 1e-9) * self.A:
            message = f"Map is not {self.A:g}-bi-Lipschitz on its patch (ratios [{low:.4g}, {high:.4g}])"
            logger.error(message)
            raise ValueError(message)
        D = self.source.dimension
        if np.any(self.rho[self.psi >= 0] > self.A**D * (1.0 + 1e-12)):
            message = f"Density exceeds A^D = {self.A**D:g}"
            logger.error(message)
            raise ValueError(message)

    @classmethod
    def identity(cls, space: DiscreteSpace, phi: Optional[Field] = None) -> "PushforwardSpec":
        if phi is None:
            phi = Field.constant(space, 1.0)
        return cls(
            source=space,
            target=space,
            psi=np.arange(space.n_points),
            rho=np.ones(space.n_points),
            phi=phi,
            A=1.0,
            L=_multiplier_bound(phi),
        )

    @classmethod
    def dilation(cls, space: DiscreteSpace, factor: float = 2.0, phi: Optional[Field] = None) -> "PushforwardSpec":
        """
        Target = the grid scaled by `factor`, Psi(x') = x' / factor (so A = factor).
        A certified source passes its Ahlfors constant to the target, with
        the radius range scaled by factor.
        """
        if space.topology != "grid":
            message = "Dilation pushforwards need a grid space"
            logger.error(message)
            raise ValueError(message)
        if factor < 1:
            message = f"Dilation factor must be at least 1 (got {factor})"
            logger.error(message)
            raise ValueError(message)
        if phi is None:
            phi = Field.constant(space, 1.0)

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
        if space.is_certified:
            r_min, r_max = space.radius_range
            target = target.with_ahlfors(space.ahlfors_constant, factor * r_min, factor * r_max)

        psi = np.full(target.n_points, -1, dtype=int)
        tolerance = 1e-9 * space.resolution
        for xi in range(target.n_points):
            image = target.coords[xi] / factor
            y = space.nearest(image)
            if np.linalg.norm(space.coords[y] - image) <= tolerance:
                psi[xi] = y
        rho = np.zeros(target.n_points)
        patch = psi >= 0
        rho[patch] = space.weights[psi[patch]] / target.weights[patch]
        return cls(
            source=space,
            target=target,
            psi=psi,
            rho=rho,
            phi=phi,
            A=float(factor),
            L=_multiplier_bound(phi),
        )


def _multiplier_bound(phi: Field) -> float:
    return float(max(np.abs(phi.values).max(), lipschitz_constant(phi.values, phi.space)))


def atom_to_ion(a: Atom, spec: PushforwardSpec, H: Optional[float] = None) -> tuple:
    """
    g(x') = rho(x') phi(Psi x') a(Psi x') / H on the patch, 0 elsewhere,
    supported in the ball of radius A r_B around the preimage of the center.

    Returns
    -------
    (Ion, Verdict)
        The ion at scale A s and its validate_ion verdict.

    Raises
    ------
    ValueError
        H below the threshold.
    PatchOverflowError
        Part of the atom's support has no preimage in the patch.
    """
    if a.space is not spec.source:
        message = "Atom does not live on the pushforward's source space"
        logger.error(message)
        raise ValueError(message)
    threshold = spec.threshold(a.scale, a.p)
    if H is None:
        H = threshold
    if H < threshold * (1.0 - 1e-12):
        message = f"H = {H:g} is below the threshold {threshold:g}"
        logger.error(message)
        raise ValueError(message)

    inverse = spec.inverse()
    support = a.values.support()
    if np.any(inverse[support] < 0) or inverse[a.center] < 0:
        message = "Atom support leaves the pushforward patch"
        logger.error(message)
        raise PatchOverflowError(message)

    patch = np.flatnonzero(spec.psi >= 0)
    values = np.zeros(spec.target.n_points)
    source_points = spec.psi[patch]
    values[patch] = spec.rho[patch] * spec.phi.values[source_points] * a.values.values[source_points] / H

    ion = Ion(
        values=Field(values, spec.target),
        center=int(inverse[a.center]),
        radius=float(spec.A * a.radius),
        scale=float(spec.A * a.scale),
        p=a.p,
    )
    verdict: Verdict = validate_ion(ion.values, ion.center, ion.radius, ion.scale, ion.p)
    if not verdict.ok:
        logger.warning(f"Transported atom fails the ion conditions: {verdict.reasons}")
    return ion, verdict
