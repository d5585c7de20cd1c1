"""Verification records, the JSON report and its text rendering."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field


@dataclass
class VerificationReport:
    check: str
    anchor: str
    residual: float
    tolerance: float
    witness: dict = field(default_factory=dict)
    seed: int | None = None
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def to_dict(self) -> dict:
        # wall_time is left out so that reports are reproducible byte for byte
        return {
            "check": self.check,
            "anchor": self.anchor,
            "residual": _clean(self.residual),
            "tolerance": self.tolerance,
            "passed": self.passed,
            "witness": _jsonable(self.witness),
            "seed": self.seed,
        }


def _clean(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = list(obj)
        if isinstance(obj, (set, frozenset)):
            items = sorted(items, key=repr)
        return [_jsonable(v) for v in items]
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, float):
        return _clean(obj)
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def build_report(reports, seed=None, config=None, extra=None) -> dict:
    records = [r.to_dict() for r in reports]
    residuals = [r.residual for r in reports if not math.isnan(r.residual)]
    out = {
        "reports": records,
        "summary": {
            "checks": len(records),
            "passed": sum(1 for r in records if r["passed"]),
            "max_residual": _clean(max(residuals)) if residuals else 0.0,
            "seed": seed,
            "config_hash": config_hash(config) if config is not None else None,
        },
    }
    if config is not None:
        out["config"] = config
    if extra:
        out.update(_jsonable(extra))
    return out


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1) + "\n"


class MalformedReport(ValueError):
    pass


def render_report(report: dict) -> str:
    """Fixed-width table, failing checks first, then declaration order."""
    if not isinstance(report, dict) or not isinstance(report.get("reports", []), list):
        raise MalformedReport("report must be an object with a 'reports' list")
    rows = []
    for i, r in enumerate(report.get("reports", [])):
        try:
            rows.append((not r["passed"], i, r["check"], r.get("anchor", ""),
                         r["residual"], r["tolerance"]))
        except (KeyError, TypeError) as exc:
            raise MalformedReport(f"record {i} is missing {exc}") from None
    rows.sort(key=lambda row: (not row[0], row[1]))
    header = f"{'check':<34} {'anchor':<44} {'residual':>11} {'tolerance':>10}  result"
    lines = [header, "-" * len(header)]
    for failed, _, check, anchor, res, tol in rows:
        res_s = f"{res:11.3e}" if isinstance(res, (int, float)) else f"{res:>11}"
        lines.append(f"{check[:34]:<34} {anchor[:44]:<44} {res_s} {tol:10.1e}  "
                     f"{'FAIL' if failed else 'PASS'}")
    return "\n".join(lines) + "\n"
