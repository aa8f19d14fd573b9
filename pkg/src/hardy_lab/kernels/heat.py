from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

from .. import logger
from ..space import DiscreteSpace
from .kernel import Kernel

#   series terms below exp(-TRUNCATION_EXPONENT) ~ 1e-16 are dropped
TRUNCATION_EXPONENT = float(np.log(1e16))


def _image_count(s: float, period: float) -> int:
    return int(np.ceil(np.sqrt(4.0 * s * TRUNCATION_EXPONENT) / period + 0.5))


def _fourier_count(s: float, period: float) -> int:
    return int(np.ceil(np.sqrt(TRUNCATION_EXPONENT * period**2 / (4.0 * np.pi**2 * s))))


def periodic_heat_1d(delta: np.ndarray, s: float, period: float) -> np.ndarray:
    """
    Heat kernel of the circle of circumference `period` at time s and
    separations `delta`.

    Uses the image sum sum_k (4 pi s)^{-1/2} exp(-(delta + k L)^2 / (4 s))
    or the Fourier series (1/L) sum_m exp(-4 pi^2 m^2 s / L^2) cos(2 pi m delta / L),
    whichever needs fewer terms before they drop below 1e-16.
    """
    delta = np.asarray(delta, dtype=float)
    n_images = _image_count(s, period)
    n_modes = _fourier_count(s, period)

    if n_images <= n_modes:
        out = np.zeros_like(delta)
        for k in range(-n_images, n_images + 1):
            shifted = delta + k * period
            out += np.exp(-shifted * shifted / (4.0 * s))
        return out / np.sqrt(4.0 * np.pi * s)

    out = np.ones_like(delta)
    for m in range(1, n_modes + 1):
        out += 2.0 * np.exp(-4.0 * np.pi**2 * m * m * s / period**2) * np.cos(2.0 * np.pi * m * delta / period)
    return out / period


def _require_torus(space: DiscreteSpace, dimension: Optional[int] = None, period: Optional[float] = None):
    if space.topology != "torus":
        message = f"Heat kernels are only available on torus spaces (got '{space.topology}')"
        logger.error(message)
        raise ValueError(message)
    if dimension is not None and space.ambient_dimension != dimension:
        message = f"Heat kernel of dimension {dimension} on a {space.ambient_dimension}-torus"
        logger.error(message)
        raise ValueError(message)
    if period is not None and abs(space.period - period) > 1e-12 * period:
        message = f"Heat kernel period {period:g} differs from the torus period {space.period:g}"
        logger.error(message)
        raise ValueError(message)


def _axis_offsets(space: DiscreteSpace, rows: np.ndarray) -> tuple:
    """Per-axis index offsets (x - y) / spacing modulo the axis length, one (rows, n) array per axis."""
    n_axis = int(round(space.period / space.spacing))
    index = np.rint(space.coords / space.spacing).astype(int)
    offsets = np.mod(index[rows][:, None, :] - index[None, :, :], n_axis)
    return tuple(np.moveaxis(offsets, -1, 0))


def heat_offset_table(space: DiscreteSpace, times: Sequence[float], coefficients: Sequence[float]) -> np.ndarray:
    """
    sum_k c_k h_{s_k} as a table over per-axis index offsets, shape
    (n_axis,) * dim. The torus heat kernel factors over axes, so every
    mixture of heat times is a sum of outer products of 1D tables.
    """
    n_axis = int(round(space.period / space.spacing))
    separations = space.spacing * np.arange(n_axis)
    axis_tables = np.stack([periodic_heat_1d(separations, float(si), space.period) for si in times])
    coefficients = np.asarray(coefficients, dtype=float)

    dim = space.ambient_dimension
    if dim == 1:
        return coefficients @ axis_tables
    if dim == 2:
        return np.einsum("k,ki,kj->ij", coefficients, axis_tables, axis_tables)
    return np.einsum("k,ki,kj,kl->ijl", coefficients, axis_tables, axis_tables, axis_tables)


def torus_heat(space: DiscreteSpace, s, rows=None) -> np.ndarray:
    """
    h_s(x, y) on a torus space for x in rows and every y, shape (len(rows), n).

    `s` is a scalar or one heat time per row.
    """
    _require_torus(space)
    if rows is None:
        rows = np.arange(space.n_points)
    rows = np.atleast_1d(np.asarray(rows, dtype=int))
    s = np.broadcast_to(np.asarray(s, dtype=float), rows.shape)
    if np.any(s <= 0):
        message = "Heat times must be positive"
        logger.error(message)
        raise ValueError(message)

    out = np.empty((rows.size, space.n_points))
    for si in np.unique(s):
        picked = np.flatnonzero(s == si)
        table = heat_offset_table(space, [si], [1.0])
        out[picked] = table[_axis_offsets(space, rows[picked])]
    return out


class HeatTorusKernel(Kernel):
    """K(t, x, y) = h_{t^2}(x, y), the heat kernel of the flat torus (exponent 1)."""

    kind = "heat_torus"

    def __init__(self, dimension: int = 1, period: float = 1.0):
        super().__init__(
            gamma=1.0,
            dimension=float(dimension),
            params=dict(period=float(period)),
        )
        self.period = float(period)

    def _evaluate(self, space: DiscreteSpace, t: np.ndarray, rows: np.ndarray) -> np.ndarray:
        _require_torus(space, int(self.dimension), self.period)
        return torus_heat(space, t * t, rows)


def semigroup_residual(
    space: DiscreteSpace,
    s1: float,
    s2: float,
    rows: Optional[Sequence[int]] = None,
) -> float:
    """max |sum_z h_s1(x,z) h_s2(z,y) m(z) - h_{s1+s2}(x,y)| over x in rows and every y."""
    if rows is None:
        rows = np.arange(space.n_points)
    rows = np.atleast_1d(np.asarray(rows, dtype=int))
    left = torus_heat(space, s1, rows)
    right = torus_heat(space, s2) * space.weights[:, None]
    combined = left @ right
    target = torus_heat(space, s1 + s2, rows)
    return float(np.abs(combined - target).max())


@dataclass
class GaussianBounds:
    lower: float
    upper: float
    times: list
    n_samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def _bisect_log(feasible, low: float, high: float, want_largest: bool, n_iter: int = 80) -> float:
    """Monotone bisection in log scale between infeasible and feasible ends."""
    a, b = np.log(low), np.log(high)
    for _ in range(n_iter):
        mid = 0.5 * (a + b)
        ok = feasible(np.exp(mid))
        if want_largest:
            if ok:
                a = mid
            else:
                b = mid
        else:
            if ok:
                b = mid
            else:
                a = mid
    return float(np.exp(a if want_largest else b))


def fit_gaussian_bounds(
    space: DiscreteSpace,
    times: Optional[Sequence[float]] = None,
    basepoint: int = 0,
) -> GaussianBounds:
    """
    Fit constants C_lo <= 1 <= C_hi with

        C_lo exp(-d^2 / (C_lo s)) s^{-n/2} <= h_s(o, y) <= C_hi exp(-d^2 / (C_hi s)) s^{-n/2}

    over the sampled heat times (default a 2^{1/4} grid on [0.01, 1]).
    """
    _require_torus(space)
    if times is None:
        times = 0.01 * 2.0 ** (np.arange(0, 27) / 4.0)
        times = times[times <= 1.0 + 1e-12]
    times = np.asarray(times, dtype=float)
    n = space.ambient_dimension

    d2 = space.dist_rows([basepoint])[0] ** 2
    scaled = np.stack([torus_heat(space, si, [basepoint])[0] * si ** (n / 2.0) for si in times])
    d2_over_s = d2[None, :] / times[:, None]

    def _upper_ok(C: float) -> bool:
        return bool(np.all(scaled <= C * np.exp(-d2_over_s / C) * (1.0 + 1e-12)))

    def _lower_ok(C: float) -> bool:
        return bool(np.all(C * np.exp(-d2_over_s / C) <= scaled * (1.0 + 1e-12)))

    upper = _bisect_log(_upper_ok, 1e-6, 1e8, want_largest=False)
    lower = _bisect_log(_lower_ok, 1e-8, 1.0, want_largest=True)
    logger.info(f"Gaussian bounds on {space.name or 'torus'}: C_lo = {lower:.4g}, C_hi = {upper:.4g}")
    return GaussianBounds(
        lower=lower,
        upper=upper,
        times=[float(si) for si in times],
        n_samples=int(scaled.size),
    )
