from __future__ import annotations

import json
from dataclasses import dataclass, field

from .tensor import scalar_to_json


@dataclass
class PropertyReport:
    """Outcome of one identity check at one sample point.

    In exact mode ``passed`` means the identity holds with zero tolerance and
    ``counterexample`` locates the first offending entry otherwise; in float
    mode ``deviation`` carries the worst absolute entry difference.
    """

    check: str
    model: str
    passed: bool
    point: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    deviation: float | None = None
    counterexample: str | None = None
    skipped: str | None = None

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "model": self.model,
            "params": self.params,
            "point": {k: scalar_to_json(v) for k, v in self.point.items()},
            "pass": self.passed,
            "deviation": self.deviation,
            "counterexample": self.counterexample,
            "skipped": self.skipped,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __bool__(self):
        return self.passed


def skipped(check, model, reason, point=None) -> PropertyReport:
    """A check that could not be evaluated at this point (not a failure)."""
    return PropertyReport(check, model.family, True, dict(point or {}), model.params_dict(), None, None, reason)


def compare(check, model, lhs, rhs, point=None, extra=None) -> PropertyReport:
    """Build a report from two operators that should be equal."""
    point = dict(point or {})
    params = model.params_dict() if hasattr(model, "params_dict") else {}
    if extra:
        params.update(extra)
    name = model.family if hasattr(model, "family") else str(model)
    if lhs.exact:
        diff = lhs.first_difference(rhs)
        cx = None
        if diff is not None:
            r, c, x, y = diff
            cx = f"entry ({r},{c}): {x} != {y}"
        return PropertyReport(check, name, diff is None, point, params, 0.0 if diff is None else None, cx)
    dev = (lhs - rhs).max_abs()
    return PropertyReport(check, name, dev <= 1e-12, point, params, dev)
