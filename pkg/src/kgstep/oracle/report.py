"""Pass/fail records for oracle comparisons."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class OracleCheck:
    """One comparison.  ``measured`` and ``threshold`` are in the same units;
    ``detail`` carries whatever else is worth keeping (per-level errors,
    convergence orders, worst point)."""

    name: str
    passed: bool
    measured: float
    threshold: float
    detail: dict = field(default_factory=dict)


def _finite(v):
    # JSON has no inf/nan; keep them readable instead of crashing the dump
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _finite(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_finite(x) for x in v]
    return v


@dataclass(frozen=True)
class OracleReport:
    checks: tuple
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return _finite(
            {
                "passed": self.passed,
                "params": self.params,
                "checks": [asdict(c) for c in self.checks],
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
