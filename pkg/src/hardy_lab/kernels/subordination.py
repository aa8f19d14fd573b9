from __future__ import annotations

import os
from typing import Optional

import numpy as np
import polars as pl
from scipy.integrate import quad, trapezoid
from scipy.optimize import brentq

from .. import logger, config
from ..cache_manager import FileCacheManager
from ..exceptions import QuadratureError
from ..space import DiscreteSpace
from ..utilities import parallel_map
from .heat import HeatTorusKernel, heat_offset_table, _axis_offsets, _require_torus
from .kernel import Kernel

S_MIN = 1e-4
S_MAX = 1e4
N_NODES = 400

#   exp(-DECAY_EXPONENT) bounds the neglected integrand beyond the cut
DECAY_EXPONENT = 60.0

#   Convergence test: absolute floor for densities that vanish at small s
ABS_TOL = 1e-8
REL_TOL = 1e-6


def _validate_alpha(alpha: float):
    if not 0 < alpha < 1:
        message = f"Subordination exponent alpha must lie in (0, 1) (got {alpha})"
        logger.error(message)
        raise ValueError(message)


def _ray_angle(alpha: float) -> float:
    if alpha <= 0.5:
        return np.pi
    return 0.5 * (0.5 * np.pi + 0.5 * np.pi / alpha)


def _cut(alpha: float, s: float, theta: float) -> float:
    a = s * abs(np.cos(theta))
    b = np.cos(alpha * theta)

    def _excess(v):
        return a * v ** (1.0 / alpha) + b * v - DECAY_EXPONENT

    high = 1.0
    while _excess(high) < 0:
        high *= 2.0
    return 1.5 * brentq(_excess, 0.0, high)


def subordinator_density(alpha: float, s: float) -> float:
    """
    F_alpha(s), the density with exp(-z^alpha) = int_0^inf F_alpha(s) exp(-s z) ds / s.

    Evaluated as the real-line integral

        (s / pi) int_0^inf exp(s r cos(th) - r^alpha cos(alpha th))
                           sin(s r sin(th) - r^alpha sin(alpha th) + th) dr

    along the ray of angle th (th = pi for alpha <= 1/2, which is the
    classical form with a sin(r^alpha sin(alpha pi)) weight; tilted towards
    pi/2 otherwise so the integrand decays), after substituting v = r^alpha.

    Raises
    ------
    QuadratureError
        If the error estimate exceeds max(1e-8, 1e-6 |value|), or the value
        is negative beyond its own error estimate.
    """
    _validate_alpha(alpha)
    if s <= 0:
        message = f"Subordinator argument must be positive (got {s})"
        logger.error(message)
        raise ValueError(message)

    theta = _ray_angle(alpha)
    upper = _cut(alpha, s, theta)
    exponent = 1.0 / alpha
    prefactor = s / (np.pi * alpha)

    if theta == np.pi:
        def _envelope(v):
            return np.exp(-s * v**exponent - v * np.cos(alpha * np.pi)) * v ** (exponent - 1.0)

        out = quad(
            _envelope,
            0.0,
            upper,
            weight="sin",
            wvar=np.sin(alpha * np.pi),
            epsabs=1e-14,
            epsrel=1e-11,
            limit=2000,
            full_output=1,
        )
    else:
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        cos_at, sin_at = np.cos(alpha * theta), np.sin(alpha * theta)

        def _integrand(v):
            r = v**exponent
            return (
                np.exp(s * r * cos_t - v * cos_at)
                * np.sin(s * r * sin_t - v * sin_at + theta)
                * v ** (exponent - 1.0)
            )

        out = quad(_integrand, 0.0, upper, epsabs=1e-14, epsrel=1e-11, limit=2000, full_output=1)

    value = prefactor * out[0]
    error = prefactor * out[1]
    if error > max(ABS_TOL, REL_TOL * abs(value)):
        message = (
            f"Subordinator quadrature did not converge (alpha={alpha:g}, s={s:g}, "
            f"error estimate {error:.3g})"
        )
        logger.error(message)
        raise QuadratureError(message, error_estimate=error)
    if value < -(1e-10 + error):
        message = f"Subordinator density is negative (alpha={alpha:g}, s={s:g}, value {value:.3g})"
        logger.error(message)
        raise QuadratureError(message, error_estimate=error)
    return max(float(value), 0.0)


def _density_table(alpha: float, s_min: float, s_max: float, n_nodes: int) -> pl.DataFrame:
    nodes = np.geomspace(s_min, s_max, n_nodes)
    values = parallel_map(lambda si: subordinator_density(alpha, float(si)), nodes)
    return pl.DataFrame({"s": nodes, "F": np.asarray(values, dtype=float)})


class Subordinator:
    """
    F_alpha tabulated on a log grid of `n_nodes` points in [s_min, s_max].

    With config.use_cache, the table is stored as parquet under
    config.path_cache_files and reused while the arguments match.
    """

    def __init__(
        self,
        alpha: float,
        n_nodes: int = N_NODES,
        s_min: float = S_MIN,
        s_max: float = S_MAX,
        use_cache: Optional[bool] = None,
    ):
        _validate_alpha(alpha)
        self.alpha = float(alpha)
        self.n_nodes = int(n_nodes)
        self.s_min = float(s_min)
        self.s_max = float(s_max)

        call_args = dict(alpha=self.alpha, s_min=self.s_min, s_max=self.s_max, n_nodes=self.n_nodes)
        if use_cache is None:
            use_cache = config.use_cache
        if use_cache:
            path_save = os.path.join(
                config.path_cache_files,
                f"subordinator_{self.alpha:.6f}_{self.n_nodes}.parquet",
            )
            table = FileCacheManager(path_save, call=_density_table, call_args=call_args).cached_table()
        else:
            table = _density_table(**call_args)

        self.nodes = table["s"].to_numpy()
        self.values = table["F"].to_numpy()
        self.log_step = float(np.log(self.s_max / self.s_min) / (self.n_nodes - 1))
        logger.info(f"Subordinator alpha = {self.alpha:g} on {self.n_nodes} nodes")

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights in log s, so that sum_k w_k g(s_k) ~ int g(s) ds / s."""
        w = np.full(self.n_nodes, self.log_step)
        w[[0, -1]] *= 0.5
        return w

    @property
    def quadrature_mass(self) -> float:
        """sum_k w_k F(s_k); the exact integral of F ds / s is 1."""
        return float(np.dot(self.weights, self.values))

    def laplace(self, z: float) -> float:
        """int F_alpha(s) exp(-s z) ds / s over the table."""
        return float(trapezoid(self.values * np.exp(-self.nodes * z), np.log(self.nodes)))

    def laplace_residual(self, z: float) -> float:
        return abs(self.laplace(z) - np.exp(-(z**self.alpha)))

    def fit_bounds(self) -> tuple:
        """
        Fitted (C_alpha, c_alpha) with F(s) <= C s^{-alpha} exp(-c s^{-alpha/(1-alpha)})
        on every node above the quadrature noise floor.
        """
        alpha = self.alpha
        beta = alpha / (1.0 - alpha)
        F = self.values
        s = self.nodes
        resolved = F > 1e-12 * F.max()

        fit = resolved & (s <= 1.0)
        c = 0.0
        if fit.sum() >= 3:
            x = s[fit] ** (-beta)
            y = -np.log(F[fit] * s[fit] ** alpha)
            slope = float(np.polyfit(x, y, 1)[0])
            c = max(0.5 * slope, 0.0)

        log_C = np.log(F[resolved]) + alpha * np.log(s[resolved]) + c * s[resolved] ** (-beta)
        C = float(np.exp(log_C.max()))
        return C, float(c)

    def bound_holds(self, C: float, c: float) -> bool:
        beta = self.alpha / (1.0 - self.alpha)
        resolved = self.values > 1e-12 * self.values.max()
        s = self.nodes[resolved]
        bound = C * s ** (-self.alpha) * np.exp(-c * s ** (-beta))
        return bool(np.all(self.values[resolved] <= bound * (1.0 + 1e-9)))


class SubordinatedKernel(Kernel):
    """
    p^alpha_{t^{2 alpha}}(x, y) = int_0^inf F_alpha(sigma) h_{sigma t^2}(x, y) d sigma / sigma
    on a torus, with exponent min(1, 2 alpha).

    The sigma integral runs over the subordinator table; the mass that the
    table misses beyond its largest node is placed on the uniform density
    1 / |T| (the heat kernel at those times is flat to within rounding).
    """

    kind = "subordinated"

    def __init__(self, alpha: float, heat: HeatTorusKernel, n_nodes: int = N_NODES):
        _validate_alpha(alpha)
        super().__init__(
            gamma=min(1.0, 2.0 * alpha),
            dimension=heat.dimension,
            params=dict(alpha=float(alpha), period=heat.period, n_nodes=int(n_nodes)),
        )
        self.alpha = float(alpha)
        self.heat = heat
        self.subordinator = Subordinator(alpha, n_nodes=n_nodes)

    def _evaluate(self, space: DiscreteSpace, t: np.ndarray, rows: np.ndarray) -> np.ndarray:
        _require_torus(space, int(self.dimension), self.heat.period)
        sub = self.subordinator
        coefficients = sub.weights * sub.values
        missing = max(1.0 - float(coefficients.sum()), 0.0)
        uniform = missing / space.period ** space.ambient_dimension

        out = np.empty((rows.size, space.n_points))
        for ti in np.unique(t):
            picked = np.flatnonzero(t == ti)
            table = heat_offset_table(space, sub.nodes * ti * ti, coefficients)
            out[picked] = table[_axis_offsets(space, rows[picked])] + uniform
        return out
