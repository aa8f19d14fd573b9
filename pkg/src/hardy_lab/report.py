from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import polars as pl

from . import logger
from .campaign import SCHEMA
from .exceptions import BundleError
from .export import dumps

FORMATS = ("json", "csv", "md")

_LEDGER_KEYS = ("D", "gamma", "c", "kappa", "sigma", "delta", "eta", "rho", "p", "binding")


def load_bundle(path: Union[str, Path]) -> dict:
    """Read <bundle>/summary.json (or the file itself) and check its schema."""
    path = Path(path)
    path_summary = path / "summary.json" if path.is_dir() else path
    if not path_summary.is_file():
        message = f"No bundle at {path.as_posix()} (summary.json not found)"
        logger.error(message)
        raise BundleError(message)
    try:
        with open(path_summary, "r", encoding="utf-8") as f:
            summary = json.load(f)
    except json.JSONDecodeError as e:
        message = f"{path_summary.as_posix()} is not valid JSON ({e})"
        logger.error(message)
        raise BundleError(message) from e
    if summary.get("schema") != SCHEMA:
        message = f"Bundle schema {summary.get('schema')!r} does not match the supported schema {SCHEMA}"
        logger.error(message)
        raise BundleError(message)
    return summary


def _number(value) -> float:
    if isinstance(value, bool):
        return float(value)
    try:
        return float(value)
    except (TypeError, ValueError):
        return float("nan")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, float)):
        return f"{value:.6g}"
    return str(value)


def checks_frame(summary: dict) -> pl.DataFrame:
    rows = []
    for ri in summary["stages"]:
        for ci in ri["checks"]:
            rows.append(
                dict(
                    stage=ri["kind"],
                    name=ri["name"],
                    criterion=ci["criterion"],
                    value=_number(ci["value"]),
                    op=ci["op"],
                    threshold=_number(ci["threshold"]),
                    passed=bool(ci["passed"]),
                )
            )
    schema = dict(
        stage=pl.String,
        name=pl.String,
        criterion=pl.String,
        value=pl.Float64,
        op=pl.String,
        threshold=pl.Float64,
        passed=pl.Boolean,
    )
    return pl.DataFrame(rows, schema=schema)


def _ledger_blocks(summary: dict) -> list:
    out = []
    for ri in summary["stages"]:
        result = ri.get("result", {})
        if ri["kind"] == "ledger":
            out.append((ri["name"], result))
        elif ri["kind"] == "decompose" and "ledger" in result:
            out.append((f"{ri['name']} (decompose)", result["ledger"]))
    return out


def _residual_traces(summary: dict, bundle: Path) -> list:
    out = []
    for ri in summary["stages"]:
        if ri["kind"] != "decompose":
            continue
        for runi in ri.get("result", {}).get("runs", []):
            path_trace = bundle / runi["trace"]
            label = f"{ri['name']} / {runi['profile']} / field {runi['field']}"
            if not path_trace.is_file():
                out.append((label, None))
                continue
            trace = pl.read_csv(path_trace)
            out.append((label, trace.select("level", "residual_ratio").rows()))
    return out


def _markdown(summary: dict, bundle: Path) -> str:
    lines = [
        f"# Campaign `{summary['campaign']}`",
        "",
        f"- config: `{summary['config']}`",
        f"- seed: {summary['seed']}",
        f"- verdict: **{'PASS' if summary['passed'] else 'FAIL'}**",
        f"- reproduce: `hardy-lab run {summary['config']} --out <bundle>`",
        "",
        "## Stages",
        "",
        "| stage | name | status |",
        "|---|---|---|",
    ]
    for ri in summary["stages"]:
        lines.append(f"| {ri['kind']} | {ri['name']} | {ri['status']} |")

    lines += [
        "",
        "## Acceptance",
        "",
        "| stage | criterion | measured | test | threshold | verdict |",
        "|---|---|---|---|---|---|",
    ]
    for ri in summary["stages"]:
        for ci in ri["checks"]:
            verdict = "pass" if ci["passed"] else "FAIL"
            lines.append(
                f"| {ri['kind']} {ri['name']} | {ci['criterion']} | {_fmt(ci['value'])} "
                f"| {ci['op']} | {_fmt(ci['threshold'])} | {verdict} |"
            )

    blocks = _ledger_blocks(summary)
    if blocks:
        lines += ["", "## Ledgers", "", "| ledger | " + " | ".join(_LEDGER_KEYS) + " |"]
        lines.append("|---" * (len(_LEDGER_KEYS) + 1) + "|")
        for namei, ledgeri in blocks:
            cells = [_fmt(ledgeri.get(ki, "")) for ki in _LEDGER_KEYS]
            lines.append(f"| {namei} | " + " | ".join(cells) + " |")

    traces = _residual_traces(summary, bundle)
    if traces:
        lines += ["", "## Residual decay", ""]
        for labeli, rowsi in traces:
            if rowsi is None:
                lines.append(f"- {labeli}: trace file missing")
                continue
            ratios = ", ".join(_fmt(ratio) for _, ratio in rowsi)
            lines.append(f"- {labeli}: {ratios}")

    failures = [ri for ri in summary["stages"] if ri["status"] in ("error", "skipped")]
    if failures:
        lines += ["", "## Errors", ""]
        for ri in failures:
            reason = ri.get("error", ri.get("reason", ""))
            binding = ri.get("result", {}).get("binding")
            if binding:
                reason = f"{reason} (binding constraint: {binding})"
            lines.append(f"- {ri['kind']} {ri['name']} ({ri['status']}): {reason}")
    return "\n".join(lines) + "\n"


def render(bundle: Union[str, Path], format: str = "md") -> str:
    """
    Render a bundle as JSON (the summary, normalized), CSV (one row per
    acceptance check) or a markdown summary. Output depends only on the
    bundle's files.
    """
    if format not in FORMATS:
        message = f"Unknown report format '{format}' (expected one of {FORMATS})"
        logger.error(message)
        raise ValueError(message)
    bundle = Path(bundle)
    summary = load_bundle(bundle)
    directory = bundle if bundle.is_dir() else bundle.parent

    if format == "json":
        return dumps(summary)
    if format == "csv":
        return checks_frame(summary).write_csv()
    return _markdown(summary, directory)
