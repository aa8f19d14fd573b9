from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import polars as pl

from . import config, logger
from .decomposition import (
    choose_constants,
    coefficient_audit,
    cutoff_family,
    ledger_at_eta,
    majorization_check,
    random_piecewise_fields,
    reconstruct,
    relative_change,
    uchiyama_decompose,
)
from .exceptions import ConfigError, HardyLabError, LedgerInfeasibleError, ResidualBoundError
from .export import write_decomposition, write_frame, write_json
from .hardy import atom_maximal_suite
from .kernels import make_kernel, verify_lai
from .load import load_table_space
from .maximal import holder_cutoff
from .space import build_space, certify_space

SCHEMA = 1

STAGE_KINDS = ("space", "kernel", "certify", "ledger", "decompose", "majorize", "hardy-suite")

KERNEL_KINDS = ("bump", "poisson_model", "heat_torus", "subordinated")

_OPTIONS = {
    "campaign": {"name", "seed", "fail_fast", "threads"},
    "space": {"topology", "dimension", "extent", "spacing", "origin", "points", "distances", "ahlfors", "D"},
    "kernel": {"kind", "profile", "support", "gamma", "dimension", "period", "alpha", "n_nodes"},
    "certify": {"kernel", "space", "gamma", "rows", "t_min"},
    "ledger": {"certify", "c"},
    "decompose": {"ledger", "levels", "profiles", "fields", "allow_subresolution", "basepoint", "eta", "waive"},
    "majorize": {"ledger", "count", "radii", "profiles", "grand", "stability"},
    "hardy-suite": {"kernel", "space", "count", "scale", "lam", "bound"},
}

#   option -> stage kind it must name
_REFERENCES = {
    "certify": {"kernel": "kernel", "space": "space"},
    "ledger": {"certify": "certify"},
    "decompose": {"ledger": "ledger"},
    "majorize": {"ledger": "ledger"},
    "hardy-suite": {"kernel": "kernel", "space": "space"},
}

_MISSING = object()


def _as_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: '{value}'")


def _as_floats(value: str) -> list:
    return [float(vi) for vi in value.replace(",", " ").split()]


def _as_names(value: str) -> list:
    return [vi for vi in value.replace(",", " ").split() if vi]


@dataclass
class Stage:
    kind: str
    name: str
    options: dict

    @property
    def section(self) -> str:
        return f"{self.kind} {self.name}"

    def get(self, key: str, convert: Callable = str, default=_MISSING):
        if key not in self.options:
            if default is _MISSING:
                message = "required option is missing"
                logger.error(f"[{self.section}] {key}: {message}")
                raise ConfigError(message, section=self.section, key=key)
            return default
        try:
            return convert(self.options[key])
        except ValueError as e:
            message = f"cannot read '{self.options[key]}' ({e})"
            logger.error(f"[{self.section}] {key}: {message}")
            raise ConfigError(message, section=self.section, key=key) from e


@dataclass
class Check:
    criterion: str
    value: float
    threshold: float
    op: str

    @property
    def passed(self) -> bool:
        if self.op == "<=":
            return bool(self.value <= self.threshold)
        if self.op == ">=":
            return bool(self.value >= self.threshold)
        if self.op == "<":
            return bool(self.value < self.threshold)
        if self.op == ">":
            return bool(self.value > self.threshold)
        return bool(self.value == self.threshold)

    def to_dict(self) -> dict:
        return dict(criterion=self.criterion, value=self.value, threshold=self.threshold, op=self.op, passed=self.passed)


@dataclass
class Campaign:
    """
    An ordered list of stages read from an INI file.

    Section order is stage order. Every section but [campaign] is named
    "<kind> <name>" with kind in STAGE_KINDS, and a stage may only name
    resources defined in earlier sections.
    """

    path: str
    name: str
    seed: int
    fail_fast: bool
    stages: list = field(default_factory=list)
    threads: Optional[int] = None

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Campaign":
        path = Path(path)
        if not path.is_file():
            message = f"Campaign file not found: {path.as_posix()}"
            logger.error(message)
            raise ConfigError(message)
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_text(f.read(), path=path.as_posix())

    @classmethod
    def from_text(cls, text: str, path: str = "<string>") -> "Campaign":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string(text, source=path)
        except configparser.Error as e:
            #   configparser messages carry the line number
            message = str(e)
            logger.error(message)
            raise ConfigError(message) from e

        header = Stage("campaign", "", dict(parser["campaign"]) if parser.has_section("campaign") else {})
        _check_keys(header, "campaign")
        campaign = cls(
            path=path,
            name=header.get("name", str, Path(path).stem),
            seed=header.get("seed", int, config.seed),
            fail_fast=header.get("fail_fast", _as_bool, False),
            threads=header.get("threads", int, None),
        )

        defined = {kindi: set() for kindi in STAGE_KINDS}
        for sectioni in parser.sections():
            if sectioni == "campaign":
                continue
            kind, _, name = sectioni.partition(" ")
            name = name.strip()
            if kind not in STAGE_KINDS or name == "":
                message = f"Section [{sectioni}] must be '<kind> <name>' with kind in {list(STAGE_KINDS)}"
                logger.error(message)
                raise ConfigError(message, section=sectioni)
            if name in defined[kind]:
                message = f"{kind} '{name}' is defined twice"
                logger.error(message)
                raise ConfigError(message, section=sectioni)

            stage = Stage(kind, name, dict(parser[sectioni]))
            _check_keys(stage, kind)
            for keyi, targeti in _REFERENCES.get(kind, {}).items():
                reference = stage.get(keyi)
                if reference not in defined[targeti]:
                    message = f"names {targeti} '{reference}', which no earlier section defines"
                    logger.error(f"[{sectioni}] {keyi}: {message}")
                    raise ConfigError(message, section=sectioni, key=keyi)
            if kind == "kernel":
                kernel_kind = stage.get("kind")
                if kernel_kind not in KERNEL_KINDS:
                    message = f"unknown kernel kind '{kernel_kind}' (expected one of {list(KERNEL_KINDS)})"
                    logger.error(f"[{sectioni}] kind: {message}")
                    raise ConfigError(message, section=sectioni, key="kind")

            defined[kind].add(name)
            campaign.stages.append(stage)
        return campaign


def _check_keys(stage: Stage, kind: str):
    unknown = sorted(set(stage.options) - _OPTIONS[kind])
    if unknown:
        message = f"unknown option (allowed: {sorted(_OPTIONS[kind])})"
        logger.error(f"[{stage.section}] {unknown[0]}: {message}")
        raise ConfigError(message, section=stage.section, key=unknown[0])


class _Resources:
    def __init__(self):
        self.spaces = {}
        self.kernels = {}
        self.fits = {}
        self.ledgers = {}


class CampaignRunner:
    """Executes a Campaign stage by stage and writes the bundle to `out_dir`."""

    def __init__(self, campaign: Campaign, out_dir: Union[str, Path]):
        self.campaign = campaign
        self.out_dir = Path(out_dir)
        self.resources = _Resources()
        self.records = []

    def run(self) -> dict:
        campaign = self.campaign
        config.seed = campaign.seed
        if campaign.threads is not None:
            config.threads = campaign.threads
        self.out_dir.mkdir(parents=True, exist_ok=True)

        logger.info(f"Campaign '{campaign.name}': {len(campaign.stages)} stages, seed {campaign.seed}")
        stopped = False
        for stagei in campaign.stages:
            if stopped:
                self.records.append(_record(stagei, "skipped", reason="fail_fast"))
                continue
            missing = self._missing_dependency(stagei)
            if missing:
                logger.warning(f"Skipping [{stagei.section}]: {missing} did not complete")
                self.records.append(_record(stagei, "skipped", reason=f"{missing} did not complete"))
                continue

            logger.info(f"[{stagei.section}]")
            handler = getattr(self, f"_stage_{stagei.kind.replace('-', '_')}")
            try:
                record = handler(stagei)
            except ConfigError:
                raise
            except (HardyLabError, ValueError) as e:
                logger.warning(f"[{stagei.section}] failed: {e}")
                record = _record(stagei, "error", error=f"{type(e).__name__}: {e}")
                if isinstance(e, LedgerInfeasibleError):
                    record["result"] = dict(binding=e.binding_constraint)
                if isinstance(e, ResidualBoundError):
                    record["result"] = dict(level=e.level, witness=e.witness, ratio=e.ratio)
            self.records.append(record)
            if record["status"] != "passed" and campaign.fail_fast:
                stopped = True

        summary = dict(
            schema=SCHEMA,
            campaign=campaign.name,
            config=Path(campaign.path).name,
            seed=campaign.seed,
            fail_fast=campaign.fail_fast,
            passed=all(ri["status"] == "passed" for ri in self.records),
            stages=self.records,
        )
        write_json(summary, self.out_dir / "summary.json")
        logger.info(f"Campaign '{campaign.name}' {'passed' if summary['passed'] else 'FAILED'}")
        return summary

    def _missing_dependency(self, stage: Stage) -> str:
        stores = dict(
            space=self.resources.spaces,
            kernel=self.resources.kernels,
            certify=self.resources.fits,
            ledger=self.resources.ledgers,
        )
        for keyi, targeti in _REFERENCES.get(stage.kind, {}).items():
            reference = stage.get(keyi)
            if reference not in stores[targeti]:
                return f"{targeti} '{reference}'"
        return ""

    def _artifact(self, stage: Stage, suffix: str) -> Path:
        return self.out_dir / f"{stage.kind}_{stage.name}_{suffix}"

    def _relative(self, path: Path) -> str:
        return path.relative_to(self.out_dir).as_posix()

    def _stage_space(self, stage: Stage) -> dict:
        topology = stage.get("topology")
        if topology == "table":
            space = load_table_space(
                stage.get("points"),
                stage.get("distances", str, None),
                dimension=stage.get("D", float, 1.0),
                name=stage.name,
            )
        else:
            space = build_space(
                topology,
                dimension=stage.get("dimension", int, 1),
                extent=stage.get("extent", float, 1.0),
                spacing=stage.get("spacing", float, 1.0 / 256.0),
                origin=stage.get("origin", float, 0.0),
                name=stage.name,
            )

        result = dict(n_points=space.n_points, resolution=space.resolution, topology=space.topology)
        checks = []
        if stage.get("ahlfors", _as_bool, True):
            space, report = certify_space(space, stage.get("D", float, space.dimension))
            ahlfors = report.to_dict()
            ahlfors.pop("violations", None)
            result["ahlfors"] = ahlfors
            checks.append(Check("Ahlfors violations", report.n_violations, 0, "<="))
        self.resources.spaces[stage.name] = space
        return _record(stage, result=result, checks=checks)

    def _stage_kernel(self, stage: Stage) -> dict:
        kind = stage.get("kind")
        params = {}
        for keyi in ("support", "gamma", "dimension", "period", "alpha"):
            if keyi in stage.options:
                params[keyi] = stage.get(keyi, float)
        if "profile" in stage.options:
            params["profile"] = stage.get("profile")
        if "n_nodes" in stage.options:
            params["n_nodes"] = stage.get("n_nodes", int)
        if kind == "subordinated":
            params["heat"] = dict(
                dimension=int(params.pop("dimension", 1)),
                period=params.pop("period", 1.0),
            )
        elif kind == "heat_torus" and "dimension" in params:
            params["dimension"] = int(params["dimension"])
        kernel = make_kernel(kind, **params)
        self.resources.kernels[stage.name] = kernel
        return _record(stage, result=kernel.describe())

    def _stage_certify(self, stage: Stage) -> dict:
        kernel = self.resources.kernels[stage.get("kernel")]
        space = self.resources.spaces[stage.get("space")]
        fitted = verify_lai(
            kernel,
            space,
            gamma=stage.get("gamma", float, None),
            n_rows=stage.get("rows", int, 32),
            t_min=stage.get("t_min", float, None),
        )
        self.resources.fits[stage.name] = (fitted, kernel, space)
        checks = [
            Check("fitted c", fitted.c, 0.0, ">"),
            Check("fitted c", fitted.c, 1.0, "<"),
            Check("support condition holds", float(fitted.support_ok), 1.0, "=="),
        ]
        return _record(stage, result=fitted.to_dict(), checks=checks)

    def _stage_ledger(self, stage: Stage) -> dict:
        fitted, kernel, space = self.resources.fits[stage.get("certify")]
        ledger = choose_constants(space, fitted, c=stage.get("c", float, None))
        self.resources.ledgers[stage.name] = (ledger, kernel, space)
        held = sum(ok for _, _, ok in ledger.conditions().values())
        checks = [Check("ledger conditions holding", held, len(ledger.conditions()), ">=")]
        return _record(stage, result=ledger.to_dict(), checks=checks)

    def _stage_decompose(self, stage: Stage) -> dict:
        ledger, kernel, space = self.resources.ledgers[stage.get("ledger")]
        N = stage.get("levels", int, 10)
        profiles = stage.get("profiles", _as_names, ["triangle"])
        n_fields = stage.get("fields", int, 1)
        basepoint = stage.get("basepoint", int, space.default_basepoint())
        allow = stage.get("allow_subresolution", _as_bool, False)
        waive = stage.get("waive", _as_names, [])
        eta = stage.get("eta", float, None)
        if eta is not None:
            ledger = ledger_at_eta(space, ledger, eta, basepoint=basepoint)

        fields = [None] if n_fields == 0 else random_piecewise_fields(space, n_fields, seed=self.campaign.seed)
        runs = []
        artifacts = []
        worst_residual = 0.0
        worst_reconstruction = 0.0
        worst_audit = 0.0
        saturated = 0
        for profilei in profiles:
            phi = holder_cutoff(space, basepoint, 1.0, ledger.gamma, profilei)
            for k, fk in enumerate(fields):
                dec = uchiyama_decompose(phi, kernel, ledger, f=fk, N=N, basepoint=basepoint, allow_subresolution=allow, waive=waive)
                _, report = reconstruct(dec, kernel)
                audit = coefficient_audit(dec)
                ratios = dec.residual_ratios
                worst_residual = max(worst_residual, max(ratios, default=0.0))
                worst_reconstruction = max(worst_reconstruction, report["residual_sup"] / report["residual_limit"])
                worst_audit = max(worst_audit, audit)
                saturated += dec.saturated_levels

                stem = self._artifact(stage, f"{profilei}_{k}")
                path_json, path_trace = write_decomposition(dec, stem)
                artifacts += [self._relative(path_json), self._relative(path_trace)]
                runs.append(
                    dict(
                        profile=profilei,
                        field=k if fk is not None else None,
                        n_levels=dec.n_levels,
                        max_residual_ratio=max(ratios, default=0.0),
                        reconstruction=report,
                        coefficient_audit=audit,
                        saturated_levels=dec.saturated_levels,
                        max_overlap=dec.max_overlap,
                        trace=self._relative(path_trace),
                    )
                )

        result = dict(ledger=ledger.to_dict(), runs=runs)
        checks = [
            Check("max residual ratio", worst_residual, 1.0, "<="),
            Check("reconstruction residual / (1-delta)^N", worst_reconstruction, 1.0 + 1e-9, "<="),
            Check("coefficient audit", worst_audit, 1e-9, "<="),
            Check("levels", min(ri["n_levels"] for ri in runs), N, ">="),
            Check("levels below resolution", saturated, 0, "<="),
        ]
        return _record(stage, result=result, checks=checks, artifacts=artifacts)

    def _stage_majorize(self, stage: Stage) -> dict:
        ledger, kernel, space = self.resources.ledgers[stage.get("ledger")]
        count = stage.get("count", int, 20)
        radii = stage.get("radii", _as_floats, [1.0])
        profiles = stage.get("profiles", _as_names, ["triangle", "raised_cosine", "envelope"])
        grand = stage.get("grand", str, None)
        basepoint = space.default_basepoint()

        cutoffs = cutoff_family(space, basepoint, ledger.gamma, radii=radii, profiles=profiles)
        fields = random_piecewise_fields(space, count, seed=self.campaign.seed)
        report = majorization_check(cutoffs, fields, kernel, ledger, basepoint=basepoint, grand=grand)

        result = report.to_dict()
        path_samples = write_frame(_samples_frame(report.per_sample), self._artifact(stage, "samples.csv"))
        result.pop("per_sample")
        result.pop("ratios")
        checks = [Check("E_emp", report.E, float("inf"), "<")]
        if stage.get("stability", _as_bool, False):
            doubled = random_piecewise_fields(space, 2 * count, seed=self.campaign.seed)
            wider = majorization_check(cutoffs, doubled, kernel, ledger, basepoint=basepoint, grand=grand)
            change = relative_change(report.E, wider.E)
            result["E_doubled"] = wider.E
            result["relative_change"] = change
            checks.append(Check("E_emp change under doubled samples", change, 0.2, "<="))
        return _record(stage, result=result, checks=checks, artifacts=[self._relative(path_samples)])

    def _stage_hardy_suite(self, stage: Stage) -> dict:
        kernel = self.resources.kernels[stage.get("kernel")]
        space = self.resources.spaces[stage.get("space")]
        report = atom_maximal_suite(
            kernel,
            space,
            count=stage.get("count", int, 20),
            s=stage.get("scale", float, 0.25),
            seed=self.campaign.seed,
            lam=stage.get("lam", float, None),
        )
        rows = report.rows
        path_rows = write_frame(_samples_frame(rows), self._artifact(stage, "atoms.csv"))
        result = report.to_dict()
        result.pop("rows")
        totals = list(report.max_total.values())
        checks = [
            Check("K*a supported in B(c, r + lam)", float(report.support_ok), 1.0, "=="),
            Check("rejected atoms", report.rejected, 0, "<="),
            Check("finite ||K*a||_1", float(all(np.isfinite(totals))), 1.0, "=="),
        ]
        bound = stage.get("bound", float, None)
        if bound is not None:
            checks.insert(0, Check("max ||K*a||_1", max(totals, default=0.0), bound, "<="))
        return _record(stage, result=result, checks=checks, artifacts=[self._relative(path_rows)])


def _samples_frame(rows: list) -> pl.DataFrame:
    """Scalar columns of per-sample rows; non-finite values stored as text come back as floats."""
    flat = []
    for ri in rows:
        flat.append(
            {
                ki: float(vi) if vi in ("nan", "inf", "-inf") else vi
                for ki, vi in ri.items()
                if not isinstance(vi, (dict, list))
            }
        )
    return pl.DataFrame(flat, infer_schema_length=None)


def _record(
    stage: Stage,
    status: str = "",
    result: Optional[dict] = None,
    checks: Optional[list] = None,
    artifacts: Optional[list] = None,
    **extra,
) -> dict:
    checks = [ci.to_dict() for ci in (checks or [])]
    if status == "":
        status = "passed" if all(ci["passed"] for ci in checks) else "failed"
    out = dict(
        kind=stage.kind,
        name=stage.name,
        status=status,
        result=result or {},
        checks=checks,
        artifacts=artifacts or [],
    )
    out.update(extra)
    return out


def run_campaign(path: Union[str, Path], out_dir: Optional[Union[str, Path]] = None, fail_fast: Optional[bool] = None) -> dict:
    """
    Parse and run a campaign file.

    Parameters
    ----------
    path : str or Path
    out_dir : str or Path, optional
        Bundle directory. Defaults to {config.data_root}/bundles/<campaign name>.
    fail_fast : bool, optional
        Overrides the file's fail_fast.

    Returns
    -------
    dict
        The summary written to <out_dir>/summary.json.
    """
    campaign = Campaign.from_file(path)
    if fail_fast is not None:
        campaign.fail_fast = fail_fast
    if out_dir is None:
        out_dir = Path(config.data_root) / "bundles" / campaign.name
    return CampaignRunner(campaign, out_dir).run()


def bundled_campaign(name: str = "1d_bump") -> Path:
    """Path of a campaign file shipped with the package."""
    path = Path(__file__).parent / "campaigns" / f"{name}.ini"
    if not path.is_file():
        message = f"No bundled campaign named '{name}'"
        logger.error(message)
        raise ConfigError(message)
    return path

