# dislocation_core/reports.py
"""
Check and report value objects shared by every verification operation.
A Report is a named list of CheckResults plus any fitted constants.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Optional


@dataclass
class CheckResult:
    """Outcome of one numerical check."""
    name: str
    passed: bool
    measured: float
    threshold: Optional[float] = None
    detail: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            raise ValueError("check name must be non-empty string")
        self.passed = bool(self.passed)
        self.measured = float(self.measured)
        if self.threshold is not None:
            self.threshold = float(self.threshold)

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict[str, Any]:
        return {
            "criterion_id": self.name,
            "status": self.status,
            "measured": _json_number(self.measured),
            "threshold": None if self.threshold is None else _json_number(self.threshold),
            "detail": self.detail,
        }


@dataclass
class Report:
    """A named collection of checks and fitted constants."""
    title: str
    checks: list[CheckResult] = field(default_factory=list)
    constants: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(
        self,
        name: str,
        passed: bool,
        measured: float,
        threshold: Optional[float] = None,
        **detail: Any,
    ) -> CheckResult:
        check = CheckResult(name=name, passed=passed, measured=measured, threshold=threshold, detail=detail)
        self.checks.append(check)
        return check

    def check(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(f"no check named '{name}' in report '{self.title}'")

    def failed(self) -> list[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def extend(self, other: "Report", prefix: str = "") -> None:
        for check in other.checks:
            self.checks.append(
                CheckResult(
                    name=f"{prefix}{check.name}",
                    passed=check.passed,
                    measured=check.measured,
                    threshold=check.threshold,
                    detail=check.detail,
                )
            )
        for key, value in other.constants.items():
            self.constants[f"{prefix}{key}"] = value

    def to_dict(self) -> dict[str, Any]:
        return {
            "title": self.title,
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
            "constants": {k: _json_number(v) for k, v in self.constants.items()},
        }


class ValidationReport(Report):
    """Report on the structural conditions of a potential."""


def _json_number(value: float) -> Any:
    # JSON has no inf/nan
    if math.isfinite(value):
        return value
    return str(value)
