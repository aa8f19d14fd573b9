from __future__ import annotations

from dataclasses import dataclass, field, asdict, replace
from typing import Optional, Sequence

import numpy as np

from .. import logger
from ..exceptions import LedgerInfeasibleError
from ..kernels import FittedConstants
from ..space import DiscreteSpace, Net, maximal_net
from ..space.metric import ROW_CHUNK
from ..utilities import chunks

#   eta is searched over 2^-k for k in this range
ETA_EXPONENTS = range(2, 61)

H_GRID = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)

SAFETY = 2.0

#   relative growth of the fitted sum constant between scales before warning
GROWTH_WARNING = 0.5

#   passes of recalibrating at the chosen eta before the constants are taken as settled
RECALIBRATION_ROUNDS = 3

CONDITIONS = (
    "eta_at_most_half",
    "w_bound",
    "w_holder",
    "delta_at_most_quarter",
    "far_field",
    "holder_propagation",
    "eta_at_most_quarter",
    "regime_descent",
    "eta_delta",
)

ETA_CONDITIONS = (
    "eta_at_most_half",
    "far_field",
    "holder_propagation",
    "eta_at_most_quarter",
    "regime_descent",
    "eta_delta",
)


def nonvanishing_pair(c: float, gamma: float) -> tuple:
    return 0.5 * c, min((0.5 * c) ** (1.0 / gamma), 0.25)


def kappa_for(c1: float, D: float, gamma: float) -> float:
    return 1.0 / (c1 * 2.0 ** (-1.0 - D - 0.5 * gamma))


def sigma_for(D: float, gamma: float) -> float:
    return min(0.25, (2.0 * (4.0 ** (D + 1.5 * gamma) + 2.0 / 3.0)) ** (-1.0 / gamma))


@dataclass
class ConstantLedger:
    """
    Numerical values of every constant the decomposition needs.

    c1, c2, kappa and sigma follow from (D, gamma, c) in closed form;
    C_main = C_{gamma/2, gamma, L} and C_holder = C_{3gamma/2, 2gamma, L}
    are calibrated on nets of the space; delta and eta are then the
    largest values meeting every condition.
    """

    D: float
    gamma: float
    A: float
    c: float
    c1: float
    c2: float
    kappa: float
    sigma: float
    scale: float = 1.0
    delta: float = float("nan")
    eta: float = float("nan")
    L: float = float("nan")
    C_main: float = float("nan")
    C_holder: float = float("nan")
    E: float = float("nan")
    binding: str = ""
    c_source: str = "fitted"
    calibration: dict = field(default_factory=dict)

    @classmethod
    def draft(
        cls,
        D: float,
        gamma: float,
        c: float,
        A: float = float("nan"),
        scale: float = 1.0,
    ) -> "ConstantLedger":
        if not 0 < c < 1:
            message = f"Nonvanishing constant c must lie in (0, 1) (got {c})"
            logger.error(message)
            raise ValueError(message)
        if not 0 < gamma <= 1:
            message = f"gamma must lie in (0, 1] (got {gamma})"
            logger.error(message)
            raise ValueError(message)
        c1, c2 = nonvanishing_pair(c, gamma)
        return cls(
            D=float(D),
            gamma=float(gamma),
            A=float(A),
            c=float(c),
            c1=c1,
            c2=c2,
            kappa=kappa_for(c1, D, gamma),
            sigma=sigma_for(D, gamma),
            scale=float(scale),
        )

    @property
    def rho(self) -> float:
        return float(np.log(1.0 - self.delta) / np.log(self.eta**self.D))

    @property
    def p(self) -> float:
        return 1.0 / (1.0 + self.rho)

    def conditions(self, eta: Optional[float] = None) -> dict:
        """
        {name: (lhs, rhs, holds)} for every inequality the iteration relies
        on, evaluated at the ledger's eta (or the given one).
        """
        if eta is None:
            eta = self.eta
        D, g, d = self.D, self.gamma, self.delta
        kd = self.kappa * d
        descent = self.c1 * 2.0 ** (-D - 0.5 * g) / (4.0 * self.C_main * self.sigma ** (-g))
        table = {
            "eta_at_most_half": (eta, 0.5),
            "w_bound": (self.C_main * kd, 0.25),
            "w_holder": (self.C_holder * kd, 0.25),
            "delta_at_most_quarter": (0.75, 1.0 - d),
            "far_field": (eta ** (0.5 * g), 0.5),
            "holder_propagation": (2.0 * eta**g, 1.0 - d),
            "eta_at_most_quarter": (eta, 0.25),
            "regime_descent": (eta**g, descent),
        }
        out = {namei: (float(lhs), float(rhs), bool(lhs <= rhs)) for namei, (lhs, rhs) in table.items()}
        lhs, rhs = eta**D, 1.0 - d
        out["eta_delta"] = (float(lhs), float(rhs), bool(lhs < rhs))
        return out

    def failed(self, eta: Optional[float] = None) -> list:
        return [namei for namei, (_, _, ok) in self.conditions(eta).items() if not ok]

    @property
    def feasible(self) -> bool:
        return np.isfinite(self.delta) and np.isfinite(self.eta) and not self.failed()

    @property
    def binding_constraint(self) -> str:
        """The condition with the smallest relative slack (or the first violated one)."""
        if self.binding != "":
            return self.binding
        conditions = self.conditions()
        failed = [namei for namei, (_, _, ok) in conditions.items() if not ok]
        if failed:
            return failed[0]
        return min(conditions, key=lambda namei: (conditions[namei][1] - conditions[namei][0]) / conditions[namei][1])

    def validate(self, waive: Sequence[str] = ()):
        """Raise on any failed condition not named in `waive`."""
        if not np.isfinite(self.delta) or not np.isfinite(self.eta):
            message = "Ledger has no delta/eta yet"
            logger.error(message)
            raise LedgerInfeasibleError(message)
        unknown = [namei for namei in waive if namei not in CONDITIONS]
        if unknown:
            message = f"Unknown ledger conditions {unknown} (expected names from {CONDITIONS})"
            logger.error(message)
            raise ValueError(message)
        failed = [namei for namei in self.failed() if namei not in waive]
        if failed:
            message = f"Ledger violates {', '.join(failed)}"
            logger.error(message)
            raise LedgerInfeasibleError(message, binding_constraint=failed[0])
        rho = self.rho
        if not 0 < rho < 1:
            message = f"rho = {rho:.6g} outside (0, 1)"
            logger.error(message)
            raise LedgerInfeasibleError(message, binding_constraint="eta_delta")

    def to_dict(self) -> dict:
        out = asdict(self)
        if np.isfinite(self.delta) and np.isfinite(self.eta):
            out["rho"] = self.rho
            out["p"] = self.p
            out["conditions"] = {
                namei: dict(lhs=lhs, rhs=rhs, holds=ok) for namei, (lhs, rhs, ok) in self.conditions().items()
            }
        out["binding"] = self.binding_constraint if np.isfinite(self.eta) else self.binding
        for keyi, valuei in list(out.items()):
            if isinstance(valuei, float) and not np.isfinite(valuei):
                out[keyi] = str(valuei)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ConstantLedger":
        names = set(cls.__dataclass_fields__)
        kwargs = {}
        for keyi, valuei in data.items():
            if keyi not in names:
                continue
            if isinstance(valuei, str) and keyi not in ("binding", "c_source"):
                valuei = float(valuei)
            kwargs[keyi] = valuei
        return cls(**kwargs)


def _sum_ratios(
    space: DiscreteSpace,
    net: Net,
    depth: np.ndarray,
    a: float,
    b: float,
    h_grid: Sequence[float],
) -> np.ndarray:
    """
    max over x of sum_{j: d(x_j,x) >= h t d(x_j)} d(x_j)^{-D-a} (1 + d(x_j,x)/(t d(x_j)))^{-D-b}
    divided by d(x)^{-D-a} max{t^b, (1+h)^{-b}}, one value per h.
    """
    D = space.dimension
    t = net.t
    h_grid = np.asarray(h_grid, dtype=float)
    sums = np.zeros((h_grid.size, space.n_points))
    for blocki in chunks(len(net), ROW_CHUNK):
        centers = net.centers[blocki]
        dj = depth[centers][:, None]
        d_jx = space.dist_rows(centers)
        term = dj ** (-D - a) * (1.0 + d_jx / (t * dj)) ** (-D - b)
        for k, hk in enumerate(h_grid):
            keep = d_jx >= hk * t * dj * (1.0 - 1e-12)
            sums[k] += np.where(keep, term, 0.0).sum(axis=0)
    bound = depth[None, :] ** (-D - a) * np.maximum(t**b, (1.0 + h_grid[:, None]) ** (-b))
    return (sums / bound).max(axis=1)


def _calibrate(
    space: DiscreteSpace,
    draft: ConstantLedger,
    a: float,
    b: float,
    times: Optional[Sequence[float]] = None,
    h_grid: Sequence[float] = H_GRID,
    basepoint: Optional[int] = None,
) -> dict:
    if b < a:
        message = f"Sum calibration needs b >= a (got a = {a}, b = {b})"
        logger.error(message)
        raise ValueError(message)
    if basepoint is None:
        basepoint = space.default_basepoint()
    if times is None:
        eta = draft.eta if np.isfinite(draft.eta) else 0.25
        times = [eta, eta**2, eta**3]
        resolved = [ti for ti in times if ti >= 2.0 * space.resolution]
        if not resolved:
            resolved = [min(0.5, 4.0 * space.resolution)]
            logger.warning(
                f"No calibration scale in {{eta, eta^2, eta^3}} is above resolution; using t = {resolved[0]:g}"
            )
        times = resolved

    depth = space.depth(basepoint)
    per_time = []
    L = 1.0
    fitted = 0.0
    previous = None
    for ti in times:
        net = maximal_net(space, basepoint, float(ti), a=draft.c2)
        L = max(L, net.constant)
        if len(net) == 0:
            ratio = 0.0
        else:
            ratio = float(_sum_ratios(space, net, depth, a, b, h_grid).max())
        per_time.append(dict(t=float(ti), ratio=ratio, n_centers=len(net), overlap=net.overlap))
        if previous is not None and previous > 0 and ratio > (1.0 + GROWTH_WARNING) * previous:
            logger.warning(
                f"Sum constant C_({a:g},{b:g}) grew from {previous:.4g} to {ratio:.4g} at t = {ti:g}; "
                "calibration may not have converged"
            )
        previous = ratio
        fitted = max(fitted, ratio)

    C = max(SAFETY * fitted, 1.0)
    return dict(C=float(C), fitted=float(fitted), L=float(L), per_time=per_time)


def calibrate_sum_constants(
    space: DiscreteSpace,
    draft: ConstantLedger,
    a: float,
    b: float,
    times: Optional[Sequence[float]] = None,
    h_grid: Sequence[float] = H_GRID,
    basepoint: Optional[int] = None,
) -> float:
    """
    Empirical C_{a,b,L}: the smallest C with

        sum_{j: d(x_j,x) >= h t d(x_j)} d(x_j)^{-D-a} (1 + d(x_j,x)/(t d(x_j)))^{-D-b}
            <= C d(x)^{-D-a} max{t^b, (1+h)^{-b}}

    over every point x, every h in `h_grid` and every net scale t (by
    default eta, eta^2 and eta^3 when resolvable), doubled and floored at 1.
    Nets are built with the draft's c2 and g = 1.
    """
    return _calibrate(space, draft, a, b, times, h_grid, basepoint)["C"]


def _largest_delta(C_main: float, C_holder: float, kappa: float) -> float:
    delta = min(1.0 / (4.0 * C_main * kappa), 1.0 / (4.0 * C_holder * kappa), 0.25)
    return float(np.nextafter(delta, 0.0))


def choose_constants(
    space: DiscreteSpace,
    fitted: FittedConstants,
    c: Optional[float] = None,
    times: Optional[Sequence[float]] = None,
    basepoint: Optional[int] = None,
) -> ConstantLedger:
    """
    Fix kappa from (D, gamma, c), then the largest delta allowed by the
    two sum conditions, then the largest dyadic eta meeting every
    remaining condition.

    The sum constants are first calibrated at the draft scales 1/4, 1/16
    and 1/64. Once eta is chosen they are recalibrated at eta, eta^2 and
    eta^3 (those above resolution), and delta and eta are searched again
    if they grew. When none of those scales is resolvable the draft-scale
    calibration stands and a warning is logged.

    Parameters
    ----------
    space : DiscreteSpace
    fitted : FittedConstants
        A certified kernel fit; its scale normalizes the kernel.
    c : float, optional
        Nonvanishing constant for the ledger. Defaults to the fitted c;
        values above it are accepted with a warning.

    Raises
    ------
    LedgerInfeasibleError
        No eta on the dyadic grid works; the condition failing at the
        smallest eta is named.
    """
    if not fitted.certified:
        message = f"Kernel '{fitted.kind}' is not certified; cannot build a ledger"
        logger.error(message)
        raise LedgerInfeasibleError(message, binding_constraint="certification")

    c_source = "fitted"
    if c is None:
        c = fitted.c
    elif c > fitted.c * (1.0 + 1e-12):
        logger.warning(f"Ledger c = {c:g} exceeds the fitted c = {fitted.c:.4g}; bounds are only checked at run time")
        c_source = "override"
    else:
        c_source = "override"

    D = space.dimension
    gamma = fitted.gamma
    A = space.ahlfors_constant if space.ahlfors_constant is not None else float("nan")
    ledger = ConstantLedger.draft(D, gamma, c, A=A, scale=fitted.scale)
    ledger.c_source = c_source

    main = _calibrate(space, ledger, 0.5 * gamma, gamma, times, basepoint=basepoint)
    holder = _calibrate(space, ledger, 1.5 * gamma, 2.0 * gamma, times, basepoint=basepoint)
    _apply_calibration(ledger, main, holder, at_eta=False)
    chosen, blocked = _search_eta(ledger)

    if times is None:
        for _ in range(RECALIBRATION_ROUNDS):
            scales = _eta_scales(chosen, space)
            if not scales:
                logger.warning(
                    f"eta = 2^{np.log2(chosen):.0f}: no scale in {{eta, eta^2, eta^3}} is above resolution; "
                    "sum constants stay calibrated at the draft scales"
                )
                break
            main = _calibrate(space, ledger, 0.5 * gamma, gamma, scales, basepoint=basepoint)
            holder = _calibrate(space, ledger, 1.5 * gamma, 2.0 * gamma, scales, basepoint=basepoint)
            settled = main["C"] <= ledger.C_main and holder["C"] <= ledger.C_holder
            if settled:
                ledger.calibration.update(at_eta=dict(main=main, holder=holder))
                break
            _apply_calibration(ledger, main, holder, at_eta=True)
            chosen, blocked = _search_eta(ledger)

    ledger.eta = chosen
    ledger.binding = blocked if blocked != "" else "eta_at_most_quarter"
    ledger.validate()

    logger.info(
        f"Ledger: kappa = {ledger.kappa:.6g}, delta = {ledger.delta:.4g}, eta = 2^{np.log2(chosen):.0f}, "
        f"p = {ledger.p:.4f} (binding: {ledger.binding})"
    )
    return ledger


def _eta_scales(eta: float, space: DiscreteSpace) -> list:
    return [float(ti) for ti in (eta, eta**2, eta**3) if ti >= 2.0 * space.resolution]


def _apply_calibration(ledger: ConstantLedger, main: dict, holder: dict, at_eta: bool):
    ledger.C_main = max(main["C"], ledger.C_main) if at_eta else main["C"]
    ledger.C_holder = max(holder["C"], ledger.C_holder) if at_eta else holder["C"]
    ledger.L = max(main["L"], holder["L"], ledger.L) if at_eta else max(main["L"], holder["L"])
    if at_eta:
        ledger.calibration.update(at_eta=dict(main=main, holder=holder))
    else:
        ledger.calibration = dict(main=main, holder=holder)
    ledger.delta = _largest_delta(ledger.C_main, ledger.C_holder, ledger.kappa)


def _search_eta(ledger: ConstantLedger) -> tuple:
    """Largest dyadic eta meeting every eta condition, with the condition that blocked the previous one."""
    blocked = ""
    for k in ETA_EXPONENTS:
        eta = 2.0 ** (-k)
        failed = [namei for namei in ledger.failed(eta) if namei in ETA_CONDITIONS]
        if not failed:
            return eta, blocked
        blocked = failed[0]

    message = (
        f"No eta = 2^-k (k <= {ETA_EXPONENTS[-1]}) satisfies the ledger; "
        f"'{blocked}' still fails at the smallest eta"
    )
    logger.error(message)
    raise LedgerInfeasibleError(message, binding_constraint=blocked)


def ledger_at_eta(
    space: DiscreteSpace,
    ledger: ConstantLedger,
    eta: float,
    basepoint: Optional[int] = None,
) -> ConstantLedger:
    """
    Copy of `ledger` with eta fixed by hand: the sum constants are
    recalibrated on nets at eta, eta^2 and eta^3 (those above resolution),
    each kept at the larger of its old and new value, and delta is the
    largest those constants allow. Conditions the fixed
    eta breaks are listed in `binding`; nothing is validated here.
    """
    if not 0 < eta < 1:
        message = f"eta must lie in (0, 1) (got {eta})"
        logger.error(message)
        raise ValueError(message)
    out = replace(ledger, calibration=dict(ledger.calibration))
    scales = _eta_scales(eta, space)
    if scales:
        main = _calibrate(space, out, 0.5 * out.gamma, out.gamma, scales, basepoint=basepoint)
        holder = _calibrate(space, out, 1.5 * out.gamma, 2.0 * out.gamma, scales, basepoint=basepoint)
        _apply_calibration(out, main, holder, at_eta=True)
    else:
        logger.warning(f"eta = {eta:g}: no calibration scale above resolution; keeping the sum constants")
    out.eta = float(eta)
    failed = out.failed()
    out.binding = ", ".join(failed) if failed else "fixed eta"
    if failed:
        logger.warning(f"Fixed eta = {eta:g} breaks {', '.join(failed)}")
    return out


def with_E(ledger: ConstantLedger, E: float) -> ConstantLedger:
    return replace(ledger, E=float(E))
