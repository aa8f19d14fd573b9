from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import polars as pl
from tqdm import tqdm

from .. import config, logger
from ..exceptions import NetResolutionError, ResidualBoundError
from ..kernels import Kernel
from ..maximal import HolderCutoffLP, radial_maximal
from ..space import DiscreteSpace, Field, Net, in_ball, maximal_net
from ..space.metric import ROW_CHUNK
from ..utilities import chunks, parallel_map
from .ledger import ConstantLedger

#   slack on the residual bound before a level counts as failed
RATIO_TOL = 1e-9

#   neighbors per point used for the Hoelder and sign checks
N_NEAR = 8

#   smallest eta^{D(1+i)} the iteration will form
SMALLEST_WEIGHT = 1e-280


@dataclass(eq=False)
class Level:
    index: int
    t: float
    centers: np.ndarray
    times: np.ndarray
    signs: np.ndarray
    coefficients: np.ndarray
    saturated: bool = False
    diagnostics: dict = field(default_factory=dict)

    def signed(self) -> np.ndarray:
        return self.signs * self.coefficients


@dataclass(eq=False)
class Decomposition:
    """
    phi = sum_i sum_j eps_ij c_ij K(t_ij, x_ij, .) + phi_N, with
    c_ij = kappa delta (1-delta)^i d(x_ij)^{-gamma/2} eta^{D(1+i)} and
    t_ij = eta^{1+i} d(x_ij). `phi` is the input cutoff after rescaling to
    sup norm at most 2^{-D-gamma/2}.
    """

    phi: Field
    phi_scale: float
    basepoint: int
    ledger: ConstantLedger
    levels: list
    residual: Field
    initial_ratio: float
    waived: list = field(default_factory=list)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def residual_ratios(self) -> list:
        return [li.diagnostics["residual_ratio"] for li in self.levels]

    @property
    def saturated_levels(self) -> int:
        return sum(li.saturated for li in self.levels)

    @property
    def max_overlap(self) -> int:
        return max((li.diagnostics["overlap"] for li in self.levels if not li.saturated), default=0)

    def trace(self) -> pl.DataFrame:
        """One row per level."""
        rows = []
        for li in self.levels:
            row = dict(level=li.index, t=li.t, n_centers=int(li.centers.size), saturated=li.saturated)
            row.update(li.diagnostics)
            rows.append(row)
        if not rows:
            return pl.DataFrame(
                schema={"level": pl.Int64, "t": pl.Float64, "n_centers": pl.Int64, "residual_ratio": pl.Float64}
            )
        return pl.DataFrame(rows)

    def to_dict(self) -> dict:
        return dict(
            basepoint=int(self.basepoint),
            phi_scale=float(self.phi_scale),
            initial_ratio=float(self.initial_ratio),
            waived=list(self.waived),
            ledger=self.ledger.to_dict(),
            levels=[
                dict(
                    index=li.index,
                    t=li.t,
                    saturated=li.saturated,
                    centers=li.centers.tolist(),
                    times=li.times.tolist(),
                    signs=li.signs.astype(int).tolist(),
                    coefficients=li.coefficients.tolist(),
                    diagnostics=_finite_or_str(li.diagnostics),
                )
                for li in self.levels
            ],
        )


def _finite_or_str(values: dict) -> dict:
    out = {}
    for keyi, valuei in values.items():
        if isinstance(valuei, float) and not np.isfinite(valuei):
            valuei = str(valuei)
        out[keyi] = valuei
    return out


def resolvable_depth(ledger: ConstantLedger, space: DiscreteSpace) -> int:
    """Number of levels i with eta^{1+i} >= 4 * resolution."""
    n = 0
    while ledger.eta ** (1 + n) >= 4.0 * space.resolution:
        n += 1
    return n


def _level_net(space: DiscreteSpace, basepoint: int, t: float, a: float, g: Field, depth: np.ndarray) -> tuple:
    """
    maximal_net at scale t, or the saturated net (every eligible point,
    each ball a single point) once t d(x) falls below the resolution.
    """
    eligible = np.flatnonzero(t * depth <= 0.5 * (1.0 + 1e-12))
    if eligible.size and t * depth[eligible].max() < space.resolution:
        net = Net(
            centers=eligible,
            seeds=eligible,
            t=float(t),
            a=float(a),
            basepoint=int(basepoint),
            overlap=1,
            average_constant=1.0,
            averaged=g,
        )
        return net, True
    return maximal_net(space, basepoint, t, a=a, g=g), False


def _level_sum(kernel: Kernel, space: DiscreteSpace, centers: np.ndarray, times: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sum_j weights_j K(times_j, centers_j, .), summed chunk by chunk in a fixed order."""
    active = np.flatnonzero(weights != 0)
    if active.size == 0:
        return np.zeros(space.n_points)

    def _part(blocki: slice) -> np.ndarray:
        rows = active[blocki]
        return weights[rows] @ kernel.evaluate(space, times[rows], centers[rows])

    parts = parallel_map(_part, list(chunks(active.size, ROW_CHUNK)))
    out = np.zeros(space.n_points)
    for parti in parts:
        out += parti
    return out


def _check_cutoff(phi: Field, ledger: ConstantLedger, basepoint: int):
    problem = HolderCutoffLP(phi.space, basepoint, 1.0, ledger.gamma, phi, dimension=ledger.D)
    outside = np.setdiff1d(np.arange(phi.space.n_points), problem.ball)
    if np.any(phi.values[outside] != 0):
        message = "Cutoff is not supported in B(o, 1)"
        logger.error(message)
        raise ValueError(message)
    violation = problem.max_constraint_violation(phi.values[problem.ball])
    if violation > 1e-9:
        message = f"Cutoff is not a gamma-Hoelder cutoff at (o, 1) (violation {violation:.3g})"
        logger.error(message)
        raise ValueError(message)


def _pair_sample(space: DiscreteSpace) -> tuple:
    neighbors = space.neighbor_sample(N_NEAR)
    x = np.repeat(np.arange(space.n_points), neighbors.shape[1])
    y = neighbors.ravel()
    return x, y, space.pair_distances(x, y)


def uchiyama_decompose(
    phi: Field,
    kernel: Kernel,
    ledger: ConstantLedger,
    f: Optional[Field] = None,
    N: int = 10,
    basepoint: Optional[int] = None,
    allow_subresolution: bool = False,
    t_min: Optional[float] = None,
    waive: Sequence[str] = (),
) -> Decomposition:
    """
    Expand a gamma-Hoelder cutoff at (o, 1) into kernel slices.

    Level i uses the net at scale eta^{1+i} (cover parameter c2, averaged
    field g = (K*f)^{1/2}), signs eps_ij = sgn phi_i(x_ij), and subtracts

        w_i = kappa delta (1-delta)^i sum_j eps_ij d(x_ij)^{-gamma/2} eta^{D(1+i)} K(eta^{1+i} d(x_ij), x_ij, .)

    from phi_i. Every level checks |phi_{i+1}| <= (1-delta)^{i+1} d^{-D-gamma/2}.

    Parameters
    ----------
    phi : Field
        Cutoff in the family at (basepoint, 1); it is rescaled by
        2^{-D-gamma/2} before the iteration.
    kernel : Kernel
        The certified kernel, unscaled; the ledger's scale is applied.
    ledger : ConstantLedger
    f : Field, optional
        Field whose radial maximal function drives the net averages
        (g = 1 when omitted).
    N : int
        Number of levels.
    allow_subresolution : bool
        Run levels whose scale eta^{1+i} is below 2 * resolution with
        saturated nets instead of raising NetResolutionError.
    waive : list of str
        Ledger conditions left unenforced, for ledgers whose eta was fixed
        by hand (see ledger_at_eta). The residual bound is still checked
        at every level.

    Raises
    ------
    ResidualBoundError
        A level breaks the residual bound; `partial` holds the levels done.
    NetResolutionError
        A level falls below resolution without allow_subresolution.
    """
    space = phi.space
    ledger.validate(waive)
    waived = [namei for namei in ledger.failed() if namei in waive]
    if waived:
        logger.warning(f"Decomposing with waived ledger conditions: {', '.join(waived)}")
    if N < 0:
        message = f"Number of levels must be nonnegative (got {N})"
        logger.error(message)
        raise ValueError(message)
    D, gamma = ledger.D, ledger.gamma
    delta, eta, kappa = ledger.delta, ledger.eta, ledger.kappa
    if N > 0 and eta ** (max(D, 1.0) * N) < SMALLEST_WEIGHT:
        message = f"{N} levels at eta = {eta:g} underflow double precision"
        logger.error(message)
        raise ValueError(message)

    if basepoint is None:
        basepoint = space.default_basepoint()
    _check_cutoff(phi, ledger, basepoint)

    scaled = kernel.with_scale(ledger.scale)
    depth = space.depth(basepoint)
    envelope = depth ** (-D - 0.5 * gamma)

    if f is None:
        g = Field.constant(space, 1.0)
    else:
        g = Field(np.sqrt(radial_maximal(scaled, f, t_min=t_min).values), space)

    phi_scale = 2.0 ** (-D - 0.5 * gamma)
    phi0 = Field(phi_scale * phi.values, space)
    current = phi0.values.copy()
    initial_ratio = float(np.max(np.abs(current) / envelope))

    pair_x, pair_y, pair_d = _pair_sample(space)
    levels = []

    def _partial() -> Decomposition:
        return Decomposition(
            phi=phi0,
            phi_scale=phi_scale,
            basepoint=int(basepoint),
            ledger=ledger,
            levels=list(levels),
            residual=Field(current, space),
            initial_ratio=initial_ratio,
            waived=waived,
        )

    for i in tqdm(range(N), disable=not config.progress, desc="levels"):
        t = eta ** (1 + i)
        if t < 2.0 * space.resolution and not allow_subresolution:
            message = (
                f"Level {i}: eta^{1 + i} = {t:.3g} is below 2 * resolution = {2.0 * space.resolution:g} "
                f"(resolvable depth {resolvable_depth(ledger, space)})"
            )
            logger.error(message)
            raise NetResolutionError(message)

        bound = (1.0 - delta) ** i * envelope
        net, saturated = _level_net(space, basepoint, t, ledger.c2, g, depth)
        centers = net.centers
        times = t * depth[centers]
        signs = np.sign(current[centers])
        coefficients = kappa * delta * (1.0 - delta) ** i * depth[centers] ** (-0.5 * gamma) * t**D

        w = _level_sum(scaled, space, centers, times, signs * coefficients)

        diagnostics = dict(
            w_ratio=float(np.max(np.abs(w) / (0.25 * bound))),
            holder_ratio=_holder_ratio(current, bound, depth, ledger.sigma * eta**i, pair_x, pair_y, pair_d),
            sign_violations=_sign_violations(current, bound, depth, ledger.sigma * eta**i, centers, pair_x, pair_y, pair_d),
            overlap=int(net.overlap),
            average_constant=float(net.average_constant),
        )

        current = current - w
        next_bound = (1.0 - delta) ** (i + 1) * envelope
        ratio = np.abs(current) / next_bound
        far = eta ** (i + 1) * depth >= 2.0
        diagnostics["residual_ratio"] = float(ratio.max())
        diagnostics["far_field_ratio"] = float(np.max(np.abs(current[far]) / (0.25 * next_bound[far]))) if np.any(far) else float("nan")

        levels.append(
            Level(
                index=i,
                t=float(t),
                centers=centers,
                times=times,
                signs=signs,
                coefficients=coefficients,
                saturated=saturated,
                diagnostics=diagnostics,
            )
        )

        if diagnostics["residual_ratio"] > 1.0 + RATIO_TOL:
            witness = int(np.argmax(ratio))
            message = (
                f"Residual bound broken at level {i + 1}: ratio {diagnostics['residual_ratio']:.6g} at point {witness}"
            )
            logger.error(message)
            raise ResidualBoundError(
                message,
                level=i + 1,
                witness=witness,
                ratio=diagnostics["residual_ratio"],
                partial=_partial(),
            )

    saturated_levels = sum(li.saturated for li in levels)
    if saturated_levels:
        logger.warning(f"{saturated_levels} of {N} levels ran below resolution with saturated nets")
    return _partial()


def _holder_ratio(values, bound, depth, radius, pair_x, pair_y, pair_d) -> float:
    """max |phi_i(x) - phi_i(y)| / (bound(x) / 2) over sampled pairs with d(x,y) <= radius d(x)."""
    near = in_ball(pair_d, radius * depth[pair_x])
    if not np.any(near):
        return float("nan")
    x, y = pair_x[near], pair_y[near]
    return float(np.max(np.abs(values[x] - values[y]) / (0.5 * bound[x])))


def _sign_violations(values, bound, depth, radius, centers, pair_x, pair_y, pair_d) -> int:
    """Sampled pairs around net centers in the regime |phi_i| > bound/2 whose signs differ."""
    regime = np.zeros(values.size, dtype=bool)
    regime[centers] = np.abs(values[centers]) > 0.5 * bound[centers]
    near = regime[pair_x] & in_ball(pair_d, radius * depth[pair_x])
    return int(np.sum(np.sign(values[pair_x[near]]) != np.sign(values[pair_y[near]])))


def reconstruct(dec: Decomposition, kernel: Kernel) -> tuple:
    """
    (sum_{i<N} w_i, report). The report carries the exact residual
    phi - sum w_i, its distance to the stored phi_N, and whether
    ||phi_N||_inf <= (1-delta)^N.
    """
    space = dec.phi.space
    scaled = kernel.with_scale(dec.ledger.scale)
    total = np.zeros(space.n_points)
    for li in dec.levels:
        total += _level_sum(scaled, space, li.centers, li.times, li.signed())

    residual = dec.phi.values - total
    sup = float(np.abs(residual).max())
    limit = (1.0 - dec.ledger.delta) ** dec.n_levels
    report = dict(
        n_levels=dec.n_levels,
        residual_sup=sup,
        residual_limit=float(limit),
        residual_ok=bool(sup <= limit * (1.0 + RATIO_TOL)),
        identity_error=float(np.abs(residual - dec.residual.values).max()),
    )
    return Field(total, space), report


def coefficient_audit(dec: Decomposition) -> float:
    """Largest relative gap between stored coefficients and the ledger formula."""
    ledger = dec.ledger
    depth = dec.phi.space.depth(dec.basepoint)
    worst = 0.0
    for li in dec.levels:
        expected = (
            ledger.kappa
            * ledger.delta
            * (1.0 - ledger.delta) ** li.index
            * depth[li.centers] ** (-0.5 * ledger.gamma)
            * ledger.eta ** (ledger.D * (1 + li.index))
        )
        if expected.size:
            worst = max(worst, float(np.max(np.abs(li.coefficients - expected) / expected)))
    return worst
