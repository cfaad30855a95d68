# api/utils/report.py
"""
Report serialization. Complex numbers become {"re": .., "im": ..}; numpy
scalars and arrays become plain JSON values. JSON output uses sorted keys so
that equal runs produce equal bytes apart from the timing fields.
"""

import json
import logging
import sys
from fractions import Fraction
from typing import Any, IO, Optional

import numpy as np

from api.schemas.verification import VerificationReport

logger = logging.getLogger(__name__)

TIMING_KEYS = ("elapsed", "timings")


def to_jsonable(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if value is None or isinstance(value, str):
        return value
    return str(value)


def _strip_timings(data: Any) -> Any:
    if isinstance(data, dict):
        return {k: _strip_timings(v) for k, v in data.items() if k not in TIMING_KEYS}
    if isinstance(data, list):
        return [_strip_timings(v) for v in data]
    return data


def report_json(report: VerificationReport, include_timings: bool = True) -> str:
    data = report.model_dump(mode="json")
    if not include_timings:
        data = _strip_timings(data)
    return json.dumps(data, indent=2, sort_keys=True)


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2e}"


def report_text(report: VerificationReport) -> str:
    rows = [("", "check", "anchor", "residual", "tolerance")]
    for rec in report.checks:
        mark = "PASS" if rec.passed else "FAIL"
        rows.append((mark, rec.check_id, rec.anchor, _fmt(rec.residual), _fmt(rec.tolerance)))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    for rec in report.checks:
        if rec.error:
            lines.append(f"  {rec.check_id}: {rec.error}")
    s = report.summary
    lines.append(f"{s.status.upper()}: {s.passed}/{s.total} checks passed, {s.failed} failed")
    return "\n".join(lines) + "\n"


def emit_report(report: VerificationReport, fmt: str = "json", path: Optional[str] = None,
                stream: Optional[IO[str]] = None, include_timings: bool = True) -> str:
    """Write the report to path, or to stream (stdout by default); returns the text"""
    if fmt == "json":
        text = report_json(report, include_timings=include_timings) + "\n"
    elif fmt == "text":
        text = report_text(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        logger.info(f"Report written to {path}")
    else:
        (stream or sys.stdout).write(text)
    return text


def parse_report(text: str) -> VerificationReport:
    return VerificationReport.model_validate_json(text)
