from __future__ import annotations

from typing import Any


class HardyLabError(Exception):
    """Root of every error raised by hardy-lab."""


class ConfigError(HardyLabError):
    def __init__(self, message: str, section: str = "", key: str = ""):
        self.section = section
        self.key = key
        location = ""
        if section != "":
            location = f"[{section}]"
            if key != "":
                location = f"{location} {key}"
            location = f"{location}: "
        super().__init__(f"{location}{message}")


class CertificationError(HardyLabError):
    def __init__(self, message: str, witnesses: list | None = None):
        self.witnesses = witnesses or []
        super().__init__(message)


class QuadratureError(HardyLabError):
    def __init__(self, message: str, error_estimate: float = float("nan")):
        self.error_estimate = error_estimate
        super().__init__(message)


class LedgerInfeasibleError(HardyLabError):
    def __init__(self, message: str, binding_constraint: str = ""):
        self.binding_constraint = binding_constraint
        super().__init__(message)


class NetResolutionError(HardyLabError):
    pass


class ResidualBoundError(HardyLabError):
    def __init__(
        self,
        message: str,
        level: int,
        witness: int,
        ratio: float,
        partial: Any = None,
    ):
        self.level = level
        self.witness = witness
        self.ratio = ratio
        self.partial = partial
        super().__init__(message)


class PatchOverflowError(HardyLabError):
    pass


class BundleError(HardyLabError):
    pass
