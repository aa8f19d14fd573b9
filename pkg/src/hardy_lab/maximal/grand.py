from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
import polars as pl
import scipy.sparse
from scipy.optimize import linprog

from .. import logger
from ..kernels import Kernel
from ..space import DiscreteSpace, Field
from ..utilities import geometric_grid, parallel_map
from ..utilities.grids import EIGHTH_OCTAVE

METHODS = ("lp_exact", "candidate_family")

#   largest space the exact LP oracle accepts
LP_MAX_POINTS = 500

#   block ascent runs on balls up to this size, from the best few candidates
ASCENT_MAX_POINTS = 256
ASCENT_STARTS = 2
EXTENSION_QUANTILES = (0.0, 0.5, 0.8)


@dataclass(frozen=True, eq=False)
class HolderCutoffLP:
    """
    max sum_y phi(y) f(y) m(y) over phi supported in B(x, r) with

        |phi(y)| <= r^-D min(1, (dist(y, B^c) / r)^gamma)
        |phi(y) - phi(z)| <= r^-D (d(y, z) / r)^gamma   for y, z in B(x, r).

    The box bound is the Hoelder constraint against the points outside the
    ball, where phi vanishes.
    """

    space: DiscreteSpace
    center: int
    radius: float
    gamma: float
    f: Field
    dimension: Optional[float] = None

    @property
    def D(self) -> float:
        return self.space.dimension if self.dimension is None else float(self.dimension)

    @cached_property
    def ball(self) -> np.ndarray:
        return self.space.ball(self.center, self.radius)

    @cached_property
    def box(self) -> np.ndarray:
        r = self.radius
        outside = np.setdiff1d(np.arange(self.space.n_points), self.ball)
        if outside.size == 0:
            gap = np.full(self.ball.size, np.inf)
        else:
            gap = self.space.dist_rows(self.ball)[:, outside].min(axis=1)
        return r ** (-self.D) * np.minimum(1.0, (gap / r) ** self.gamma)

    @cached_property
    def pair_bounds(self) -> tuple:
        """(i, j, h_ij) over pairs i < j of ball points."""
        ball = self.ball
        i, j = np.triu_indices(ball.size, k=1)
        d = self.space.dist_rows(ball)[:, ball][i, j]
        h = self.radius ** (-self.D) * (d / self.radius) ** self.gamma
        return i, j, h

    @property
    def objective(self) -> np.ndarray:
        return self.f.values[self.ball] * self.space.weights[self.ball]

    def constraint_matrix(self) -> tuple:
        i, j, h = self.pair_bounds
        n_pairs = i.size
        rows = np.concatenate([np.arange(n_pairs), np.arange(n_pairs), n_pairs + np.arange(n_pairs), n_pairs + np.arange(n_pairs)])
        cols = np.concatenate([i, j, i, j])
        data = np.concatenate([np.ones(n_pairs), -np.ones(n_pairs), -np.ones(n_pairs), np.ones(n_pairs)])
        A = scipy.sparse.coo_matrix((data, (rows, cols)), shape=(2 * n_pairs, self.ball.size)).tocsr()
        return A, np.concatenate([h, h])

    def max_constraint_violation(self, phi: np.ndarray) -> float:
        """Largest violation of the constraints by ball values phi."""
        violation = float(np.max(np.abs(phi) - self.box, initial=0.0))
        i, j, h = self.pair_bounds
        if i.size:
            violation = max(violation, float(np.max(np.abs(phi[i] - phi[j]) - h)))
        return violation

    def solve(self) -> tuple:
        """(value, phi as a Field, success) from HiGHS."""
        c = self.objective
        if not np.any(c):
            return 0.0, Field.zeros(self.space), True
        A, b = self.constraint_matrix()
        bounds = list(zip(-self.box, self.box))
        result = linprog(
            -c,
            A_ub=A if A.shape[0] else None,
            b_ub=b if A.shape[0] else None,
            bounds=bounds,
            method="highs",
        )
        if not result.success:
            logger.warning(f"Hoelder cutoff LP failed at x = {self.center}, r = {self.radius:g}: {result.message}")
            return float("nan"), Field.zeros(self.space), False
        values = np.zeros(self.space.n_points)
        values[self.ball] = result.x
        return float(-result.fun), Field(values, self.space), True

    def to_text(self) -> str:
        """CPLEX-LP rendering of the instance (variables p<point id>)."""
        ball = self.ball
        names = [f"p{int(y)}" for y in ball]
        lines = [
            f"\\ Hoelder cutoff LP: center {self.center}, radius {self.radius:.17g}, gamma {self.gamma:.17g}",
            "Maximize",
        ]
        terms = [f"{ci:+.17g} {ni}" for ci, ni in zip(self.objective, names) if ci != 0]
        lines.append(" obj: " + (" ".join(terms) if terms else f"0 {names[0]}"))
        lines.append("Subject To")
        i, j, h = self.pair_bounds
        for k in range(i.size):
            a, b = names[i[k]], names[j[k]]
            lines.append(f" h{k}a: {a} - {b} <= {h[k]:.17g}")
            lines.append(f" h{k}b: {b} - {a} <= {h[k]:.17g}")
        lines.append("Bounds")
        for ni, bi in zip(names, self.box):
            lines.append(f" {-bi:.17g} <= {ni} <= {bi:.17g}")
        lines.append("End")
        return "\n".join(lines) + "\n"


def project_to_family(problem: HolderCutoffLP, shape: np.ndarray) -> np.ndarray:
    """
    Largest multiple of `shape` (values on the ball) that satisfies the
    box and pairwise constraints.
    """
    shape = np.asarray(shape, dtype=float)
    if not np.any(shape):
        return shape
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.min(np.where(shape != 0, problem.box / np.abs(shape), np.inf))
        i, j, h = problem.pair_bounds
        if i.size:
            jump = np.abs(shape[i] - shape[j])
            factor = min(factor, float(np.min(np.where(jump > 0, h / jump, np.inf))))
    if not np.isfinite(factor):
        return np.zeros_like(shape)
    return factor * shape


def holder_cutoff(
    space: DiscreteSpace,
    x: int,
    r: float,
    gamma: float,
    profile: str = "triangle",
    dimension: Optional[float] = None,
) -> Field:
    """
    A member of the gamma-Hoelder cutoff family at (x, r) with the given
    radial profile ("triangle", "raised_cosine" or "envelope"), scaled to
    its largest admissible multiple.
    """
    problem = HolderCutoffLP(space, int(x), float(r), float(gamma), Field.zeros(space), dimension)
    shape = _radial_shape(problem, profile)
    values = np.zeros(space.n_points)
    values[problem.ball] = project_to_family(problem, shape)
    return Field(values, space)


def _radial_shape(problem: HolderCutoffLP, profile: str) -> np.ndarray:
    d = problem.space.dist_rows([problem.center])[0][problem.ball] / problem.radius
    if profile == "triangle":
        return np.maximum(0.0, 1.0 - d)
    if profile == "raised_cosine":
        return 0.5 * (1.0 + np.cos(np.pi * np.minimum(d, 1.0)))
    if profile == "envelope":
        return problem.box.copy()
    message = f"Unknown cutoff profile '{profile}'"
    logger.error(message)
    raise ValueError(message)


def _dipole_shape(problem: HolderCutoffLP) -> np.ndarray:
    """Two opposite bumps of radius r/2 around the ball points nearest r/2 from x on either side."""
    space = problem.space
    ball = problem.ball
    d_center = space.dist_rows([problem.center])[0][ball]
    target = 0.5 * problem.radius
    ring = np.abs(d_center - target) <= 0.25 * problem.radius
    first = ball[np.argmin(np.abs(d_center - target))]
    d_first = space.dist_rows([first])[0][ball]
    opposite = np.flatnonzero(ring & (d_first > target))
    if opposite.size == 0:
        return np.zeros(ball.size)
    second = ball[opposite[np.argmax(d_first[opposite])]]
    d_second = space.dist_rows([second])[0][ball]
    return np.maximum(0.0, 1.0 - d_first / target) - np.maximum(0.0, 1.0 - d_second / target)


def _modulus(problem: HolderCutoffLP) -> np.ndarray:
    """Pairwise Hoelder bounds h_ij on the ball as a dense symmetric matrix."""
    d_ball = problem.space.dist_rows(problem.ball)[:, problem.ball]
    return problem.radius ** (-problem.D) * (d_ball / problem.radius) ** problem.gamma


def _sign_following_shape(problem: HolderCutoffLP, modulus: np.ndarray) -> np.ndarray:
    """
    (g+ - g-) / 2 where g+ is the envelope capped by the Hoelder distance to
    {f <= 0} and g- the same for {f >= 0}; feasible by construction.
    """
    fb = problem.f.values[problem.ball]

    def _capped(blocked: np.ndarray) -> np.ndarray:
        if not np.any(blocked):
            return problem.box.copy()
        return np.minimum(problem.box, modulus[:, blocked].min(axis=1))

    return 0.5 * (_capped(fb <= 0) - _capped(fb >= 0))


def _extension_shapes(problem: HolderCutoffLP, modulus: np.ndarray) -> dict:
    """
    Upper and lower Hoelder extensions of sign(c) * box from the points
    where |c| exceeds a quantile threshold, and their midpoint.

    The box is itself h-Lipschitz, so both extensions stay inside it and
    are feasible without projection.
    """
    c = problem.objective
    box = problem.box
    nonzero = np.abs(c[c != 0])
    if nonzero.size == 0:
        return {}
    shapes = {}
    for qi in EXTENSION_QUANTILES:
        pinned = np.abs(c) >= np.quantile(nonzero, qi)
        target = np.sign(c[pinned]) * box[pinned]
        upper = np.minimum(box, (target[None, :] + modulus[:, pinned]).min(axis=1))
        lower = np.maximum(-box, (target[None, :] - modulus[:, pinned]).max(axis=1))
        shapes[f"extension_upper_q{qi:g}"] = upper
        shapes[f"extension_lower_q{qi:g}"] = lower
        shapes[f"extension_mid_q{qi:g}"] = 0.5 * (upper + lower)
    return shapes


def _closure(tight: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure of a boolean relation by repeated squaring."""
    reach = tight | np.eye(tight.shape[0], dtype=bool)
    while True:
        step = (reach.astype(float) @ reach.astype(float)) > 0
        if np.array_equal(step, reach):
            return reach
        reach = step


def ascend(problem: HolderCutoffLP, phi: np.ndarray, modulus: np.ndarray, max_moves: Optional[int] = None) -> np.ndarray:
    """
    Improve a feasible phi by shifting closed blocks of ball points.

    Raising phi_i past a tight pair bound forces the partner up as well;
    each move raises (or lowers) the closure of one seed under that
    relation by the largest step the remaining bounds allow, provided the
    closure gains objective and touches no box bound. Stops when no seed
    closure improves.
    """
    c = problem.objective
    box = problem.box
    phi = np.array(phi, dtype=float)
    n = phi.size
    if n == 0 or not np.any(c):
        return phi
    tol = 1e-12 * problem.radius ** (-problem.D)
    if max_moves is None:
        max_moves = 2 * n + 10
    off_diagonal = ~np.eye(n, dtype=bool)

    for _ in range(max_moves):
        moved = False
        for sign in (1.0, -1.0):
            psi = sign * phi
            gain = sign * c
            slack = modulus - (psi[:, None] - psi[None, :])
            reach = _closure((slack <= tol) & off_diagonal)
            at_box = psi >= box - tol
            gains = reach.astype(float) @ gain
            blocked = (reach.astype(float) @ at_box.astype(float)) > 0
            for seed in np.argsort(-gains):
                if gains[seed] <= 0 or blocked[seed]:
                    continue
                inside = reach[seed]
                step = float((box - psi)[inside].min())
                if not np.all(inside):
                    step = min(step, float(slack[np.ix_(inside, ~inside)].min()))
                if step > tol:
                    psi[inside] += step
                    phi = sign * psi
                    moved = True
                    break
            if moved:
                break
        if not moved:
            break
    return phi


def _candidate_shapes(problem: HolderCutoffLP, kernels: Sequence[Kernel], modulus: np.ndarray) -> dict:
    shapes = {
        "envelope": problem.box.copy(),
        "triangle": _radial_shape(problem, "triangle"),
        "raised_cosine": _radial_shape(problem, "raised_cosine"),
        "dipole": _dipole_shape(problem),
        "sign_following": _sign_following_shape(problem, modulus),
    }
    shapes.update(_extension_shapes(problem, modulus))
    t = min(problem.radius, 1.0)
    for k, kerneli in enumerate(kernels):
        shapes[f"kernel{k}"] = kerneli.row(problem.space, t, problem.center)[problem.ball]
    return shapes


def candidate_value(problem: HolderCutoffLP, kernels: Sequence[Kernel] = (), polish: bool = True) -> tuple:
    """
    Best |pairing| over the projected candidate library and the winning
    candidate name.

    With `polish` (balls of at most ASCENT_MAX_POINTS points), the
    best few candidates are improved by block ascent; the winner then
    carries a "+ascent" suffix.
    """
    c = problem.objective
    modulus = _modulus(problem)
    scored = []
    for namei, shapei in _candidate_shapes(problem, kernels, modulus).items():
        phi = project_to_family(problem, shapei)
        value = float(np.dot(phi, c))
        if value < 0:
            phi, value = -phi, -value
        scored.append((value, namei, phi))
    scored.sort(key=lambda si: -si[0])
    if not scored:
        return 0.0, ""
    best, winner = scored[0][0], scored[0][1]
    if best <= 0:
        return 0.0, ""

    if polish and problem.ball.size <= ASCENT_MAX_POINTS:
        for value, namei, phi in scored[:ASCENT_STARTS]:
            improved = float(np.dot(ascend(problem, phi, modulus), c))
            if improved > best:
                best, winner = improved, f"{namei}+ascent"
    return best, winner


@dataclass(frozen=True, eq=False)
class GrandMaximalResult:
    points: np.ndarray
    values: np.ndarray
    radius: np.ndarray
    method: str
    fallback: bool = False
    winners: list = field(default_factory=list)

    def to_frame(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "point_id": self.points,
                "value": self.values,
                "radius": self.radius,
            }
        )


def grand_maximal(
    space: DiscreteSpace,
    f: Field,
    gamma: float,
    method: str = "candidate_family",
    points: Optional[Sequence[int]] = None,
    radii: Optional[Sequence[float]] = None,
    kernels: Sequence[Kernel] = (),
    dimension: Optional[float] = None,
) -> GrandMaximalResult:
    """
    G_gamma f(x) = max over radii r <= 1 of the sup of |sum phi f m| over
    the gamma-Hoelder cutoff family at (x, r).

    Parameters
    ----------
    space : DiscreteSpace
    f : Field
    gamma : float
    method : str
        "lp_exact" solves each (x, r) instance with HiGHS (spaces of at most
        500 points); "candidate_family" evaluates a fixed library of
        feasible cutoffs and is a lower bound.
    points : list of int, optional
        Points at which to evaluate (all by default).
    radii : list of float, optional
        Radii (default: 2^{1/8} grid from resolution to 1).
    kernels : list of Kernel
        Kernels whose slices K(r, x, .) join the candidate library.

    Returns
    -------
    GrandMaximalResult
    """
    if method not in METHODS:
        message = f"Unknown grand maximal method '{method}' (expected one of {METHODS})"
        logger.error(message)
        raise ValueError(message)
    if method == "lp_exact" and space.n_points > LP_MAX_POINTS:
        message = f"lp_exact needs at most {LP_MAX_POINTS} points (space has {space.n_points})"
        logger.error(message)
        raise ValueError(message)

    if points is None:
        points = np.arange(space.n_points)
    points = np.atleast_1d(np.asarray(points, dtype=int))
    if radii is None:
        radii = geometric_grid(1.0, space.resolution, EIGHTH_OCTAVE)
    radii = np.asarray(radii, dtype=float)

    fallback = False

    def _at_point(x: int) -> tuple:
        nonlocal fallback
        best, best_r, winner = 0.0, float(radii[0]), ""
        for ri in radii:
            problem = HolderCutoffLP(space, int(x), float(ri), float(gamma), f, dimension)
            if method == "lp_exact":
                value, _, ok = problem.solve()
                name = "lp"
                if not ok:
                    fallback = True
                    value, name = candidate_value(problem, kernels)
            else:
                value, name = candidate_value(problem, kernels)
            if value > best:
                best, best_r, winner = value, float(ri), name
        return best, best_r, winner

    results = parallel_map(_at_point, list(points))
    if fallback:
        logger.warning("Some Hoelder cutoff LPs failed; candidate values were used instead")

    return GrandMaximalResult(
        points=points,
        values=np.array([ri[0] for ri in results]),
        radius=np.array([ri[1] for ri in results]),
        method=method,
        fallback=fallback,
        winners=[ri[2] for ri in results],
    )

