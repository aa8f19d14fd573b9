from __future__ import annotations

import copy
from typing import Callable, Optional

import numpy as np

from .. import logger
from ..space import DiscreteSpace

KINDS = ("bump", "poisson_model", "heat_torus", "subordinated", "glued", "localized", "explicit")


class Kernel:
    """
    Base class for kernels K(t, x, y) on a DiscreteSpace.

    Subclasses implement `_evaluate(space, t, rows)` returning the block
    K(t_k, rows[k], y) for every y, with one time per row. `scale`
    multiplies every value (certification fits the largest admissible one).
    """

    kind = "abstract"

    def __init__(
        self,
        gamma: float = 1.0,
        support: float = np.inf,
        dimension: float = 1.0,
        scale: float = 1.0,
        params: Optional[dict] = None,
    ):
        if not 0 < gamma <= 1:
            message = f"Kernel exponent gamma must lie in (0, 1] (got {gamma})"
            logger.error(message)
            raise ValueError(message)
        self.gamma = float(gamma)
        self.support = float(support)
        self.dimension = float(dimension)
        self.scale = float(scale)
        self.params = dict(params or {})

    def _evaluate(self, space: DiscreteSpace, t: np.ndarray, rows: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, space: DiscreteSpace, t, rows=None) -> np.ndarray:
        """
        K(t, x, y) for x in rows and every y, shape (len(rows), n).

        `t` is a scalar or one time per row, each in (0, 1].
        """
        if rows is None:
            rows = np.arange(space.n_points)
        rows = np.atleast_1d(np.asarray(rows, dtype=int))
        t = np.broadcast_to(np.asarray(t, dtype=float), rows.shape)
        if np.any(t <= 0) or np.any(t > 1.0 + 1e-12):
            message = f"Kernel times must lie in (0, 1] (got range [{t.min():g}, {t.max():g}])"
            logger.error(message)
            raise ValueError(message)
        return self.scale * self._evaluate(space, t, rows)

    def row(self, space: DiscreteSpace, t: float, x: int) -> np.ndarray:
        return self.evaluate(space, t, [x])[0]

    def with_scale(self, s: float) -> "Kernel":
        scaled = copy.copy(self)
        scaled.scale = self.scale * float(s)
        return scaled

    def describe(self) -> dict:
        out = dict(
            kind=self.kind,
            gamma=self.gamma,
            support=self.support if np.isfinite(self.support) else "inf",
            dimension=self.dimension,
            scale=self.scale,
        )
        for keyi, valuei in self.params.items():
            if isinstance(valuei, (int, float, str, bool)):
                out[keyi] = valuei
        return out

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.describe()})"


class RadialKernel(Kernel):
    """K(t, x, y) = t^{-D} psi(d(x, y) / t)."""

    def __init__(
        self,
        kind: str,
        profile: Callable[[np.ndarray], np.ndarray],
        dimension: float = 1.0,
        gamma: float = 1.0,
        support: float = np.inf,
        params: Optional[dict] = None,
    ):
        super().__init__(gamma=gamma, support=support, dimension=dimension, params=params)
        self.kind = kind
        self.profile = profile

    def _evaluate(self, space: DiscreteSpace, t: np.ndarray, rows: np.ndarray) -> np.ndarray:
        d = space.dist_rows(rows)
        tt = t[:, None]
        return tt ** (-self.dimension) * self.profile(d / tt)


class ExplicitKernel(Kernel):
    """Kernel from a user function fn(t, d) of time (column) and distance."""

    kind = "explicit"

    def __init__(
        self,
        fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
        dimension: float = 1.0,
        gamma: float = 1.0,
        support: float = np.inf,
        name: str = "",
    ):
        super().__init__(gamma=gamma, support=support, dimension=dimension, params=dict(name=name))
        self.fn = fn

    def _evaluate(self, space: DiscreteSpace, t: np.ndarray, rows: np.ndarray) -> np.ndarray:
        d = space.dist_rows(rows)
        values = np.asarray(self.fn(t[:, None], d), dtype=float)
        return np.broadcast_to(values, d.shape).copy()


def triangle_profile(lam: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    def _psi(u):
        return np.maximum(0.0, 1.0 - np.asarray(u) / lam)
    return _psi


def raised_cosine_profile(lam: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    def _psi(u):
        u = np.asarray(u)
        return np.where(u < lam, 0.5 * (1.0 + np.cos(np.pi * np.minimum(u, lam) / lam)), 0.0)
    return _psi


def poisson_profile(dimension: float) -> Callable[[np.ndarray], np.ndarray]:
    def _psi(u):
        u = np.asarray(u)
        return (1.0 + u * u) ** (-(dimension + 1.0) / 2.0)
    return _psi


_PROFILES = {
    "triangle": (triangle_profile, 1.0),
    "raised_cosine": (raised_cosine_profile, np.pi / 2.0),
}


def check_profile(
    profile: Callable[[np.ndarray], np.ndarray],
    gamma: float,
    support: float,
    holder_constant: float,
    n_samples: int = 1201,
):
    """
    Sampled profile checks: psi(0) > 0, psi = 0 beyond `support`, and the
    gamma-Hoelder quotient does not exceed `holder_constant`.
    """
    u = np.linspace(0.0, 1.5 * support, n_samples)
    psi = np.asarray(profile(u), dtype=float)
    if not psi[0] > 0:
        message = f"Bump profile must be positive at 0 (psi(0) = {psi[0]:g})"
        logger.error(message)
        raise ValueError(message)
    if np.any(psi < 0):
        message = "Bump profile must be nonnegative"
        logger.error(message)
        raise ValueError(message)
    outside = u > support * (1.0 + 1e-12)
    if np.any(psi[outside] != 0):
        message = f"Bump profile is not supported in [0, {support:g}]"
        logger.error(message)
        raise ValueError(message)

    du = np.abs(u[:, None] - u[None, :])
    dpsi = np.abs(psi[:, None] - psi[None, :])
    mask = du > 0
    quotient = float((dpsi[mask] / du[mask] ** gamma).max())
    if quotient > holder_constant * (1.0 + 1e-9):
        message = (
            f"Bump profile is not {gamma:g}-Hoelder with constant {holder_constant:g} "
            f"(sampled quotient {quotient:g})"
        )
        logger.error(message)
        raise ValueError(message)
    return quotient


def make_kernel(kind: str, **params) -> Kernel:
    """
    Build a kernel by kind.

    Parameters
    ----------
    kind : str
        One of "bump", "poisson_model", "heat_torus", "subordinated",
        "explicit".
    **params
        bump: profile ("triangle", "raised_cosine" or callable), support
        (lambda, default 1), dimension, gamma, holder_constant.
        poisson_model: dimension, gamma.
        heat_torus: dimension, period.
        subordinated: alpha, heat (a heat_torus kernel, or its params),
        n_nodes.
        explicit: fn(t, d), dimension, gamma, support, name.

    Returns
    -------
    Kernel
    """
    kind = str(kind).strip().lower()
    if kind == "bump":
        profile = params.get("profile", "triangle")
        lam = float(params.get("support", 1.0))
        gamma = float(params.get("gamma", 1.0))
        dimension = float(params.get("dimension", 1.0))
        if callable(profile):
            psi = profile
            profile_name = getattr(profile, "__name__", "custom")
            holder_constant = params.get("holder_constant")
            if holder_constant is None:
                message = "Custom bump profiles need a declared holder_constant"
                logger.error(message)
                raise ValueError(message)
        else:
            if profile not in _PROFILES:
                message = f"Unknown bump profile '{profile}' (expected one of {list(_PROFILES)})"
                logger.error(message)
                raise ValueError(message)
            factory, lipschitz = _PROFILES[profile]
            psi = factory(lam)
            profile_name = profile
            holder_constant = params.get("holder_constant", (lipschitz / lam) ** gamma)
        check_profile(psi, gamma, lam, float(holder_constant))
        return RadialKernel(
            kind="bump",
            profile=psi,
            dimension=dimension,
            gamma=gamma,
            support=lam,
            params=dict(profile=profile_name, holder_constant=float(holder_constant)),
        )

    if kind == "poisson_model":
        dimension = float(params.get("dimension", 1.0))
        return RadialKernel(
            kind="poisson_model",
            profile=poisson_profile(dimension),
            dimension=dimension,
            gamma=float(params.get("gamma", 1.0)),
        )

    if kind == "heat_torus":
        from .heat import HeatTorusKernel

        return HeatTorusKernel(
            dimension=int(params.get("dimension", 1)),
            period=float(params.get("period", 1.0)),
        )

    if kind == "subordinated":
        from .heat import HeatTorusKernel
        from .subordination import SubordinatedKernel

        heat = params.get("heat")
        if heat is None or isinstance(heat, dict):
            heat = HeatTorusKernel(**(heat or {}))
        if not isinstance(heat, HeatTorusKernel):
            message = "Subordinated kernels need a heat_torus kernel"
            logger.error(message)
            raise ValueError(message)
        return SubordinatedKernel(
            alpha=float(params.get("alpha", 0.5)),
            heat=heat,
            n_nodes=int(params.get("n_nodes", 400)),
        )

    if kind == "explicit":
        fn = params.get("fn")
        if fn is None:
            message = "Explicit kernels need fn(t, d)"
            logger.error(message)
            raise ValueError(message)
        return ExplicitKernel(
            fn=fn,
            dimension=float(params.get("dimension", 1.0)),
            gamma=float(params.get("gamma", 1.0)),
            support=float(params.get("support", np.inf)),
            name=str(params.get("name", "")),
        )

    message = f"Unknown kernel kind '{kind}' (expected one of {KINDS})"
    logger.error(message)
    raise ValueError(message)
