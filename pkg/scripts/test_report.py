#!/usr/bin/env python3
"""
Report serialization tests
JSON conversion of numeric values, stable JSON output and the text table
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import io
import json
from fractions import Fraction

import numpy as np
import pytest

from api.schemas.verification import CheckRecord, ReportSummary, VerificationReport
from api.utils.report import emit_report, parse_report, report_json, report_text, to_jsonable


def sample_report(elapsed=0.25):
    checks = [
        CheckRecord(check_id="barnes/k=0/mu=0+3.14159i", anchor="barnes-closed-form", suite="barnes",
                    inputs={"k": 0}, residual=3e-12, tolerance=1e-8, passed=True, elapsed=elapsed),
        CheckRecord(check_id="detm/n=2/sample=0", anchor="detm-product", suite="detm",
                    residual=None, tolerance=0.0, passed=False, error="PoleError: boom", elapsed=elapsed),
    ]
    return VerificationReport(
        config_echo={"suites": ["barnes", "detm"], "seed": 42},
        checks=checks,
        summary=ReportSummary(total=2, passed=1, failed=1, status="fail"),
        environment={"seed": 42, "timings": {"run/barnes": elapsed}},
    )


def test_to_jsonable():
    value = {
        "z": 1 - 2j,
        "arr": np.array([1.5, 2.5]),
        "carr": np.array([1j]),
        "count": np.int64(3),
        "flag": np.bool_(True),
        "frac": Fraction(2, 3),
        1: (None, "x"),
    }
    assert to_jsonable(value) == {
        "z": {"re": 1.0, "im": -2.0},
        "arr": [1.5, 2.5],
        "carr": [{"re": 0.0, "im": 1.0}],
        "count": 3,
        "flag": True,
        "frac": "2/3",
        "1": [None, "x"],
    }


def test_json_is_stable_without_timings():
    a = report_json(sample_report(0.25), include_timings=False)
    b = report_json(sample_report(9.75), include_timings=False)
    assert a == b
    data = json.loads(a)
    assert "timings" not in data["environment"]
    assert all("elapsed" not in check for check in data["checks"])
    assert list(data) == sorted(data)


def test_json_keeps_timings_by_default():
    data = json.loads(report_json(sample_report()))
    assert data["checks"][0]["elapsed"] == 0.25
    assert data["schema_version"] == "1.0"


def test_text_report():
    text = report_text(sample_report())
    lines = text.splitlines()
    assert lines[1].startswith("PASS")
    assert lines[2].startswith("FAIL")
    assert "detm/n=2/sample=0: PoleError: boom" in text
    assert lines[-1] == "FAIL: 1/2 checks passed, 1 failed"


def test_parse_report_reads_json_back():
    report = sample_report()
    parsed = parse_report(report_json(report))
    assert parsed.summary == report.summary
    assert [c.check_id for c in parsed.checks] == [c.check_id for c in report.checks]
    assert not parsed.passed


def test_emit_report(tmp_path):
    stream = io.StringIO()
    emit_report(sample_report(), fmt="text", stream=stream)
    assert stream.getvalue().endswith("1 failed\n")
    path = tmp_path / "report.json"
    emit_report(sample_report(), fmt="json", path=str(path))
    assert parse_report(path.read_text(encoding="utf-8")).summary.total == 2
    with pytest.raises(ValueError):
        emit_report(sample_report(), fmt="xml", stream=stream)


def main():
    """Run all report tests that need no fixtures"""
    print("🧪 Starting report tests...\n")

    tests = [
        ("JSON Values", test_to_jsonable),
        ("Stable JSON", test_json_is_stable_without_timings),
        ("Timings", test_json_keeps_timings_by_default),
        ("Text Table", test_text_report),
        ("Parse Back", test_parse_report_reads_json_back),
    ]

    results = {}
    for test_name, test_func in tests:
        try:
            test_func()
            results[test_name] = True
        except Exception as e:
            print(f"❌ {test_name} failed: {e}")
            results[test_name] = False

    passed = sum(results.values())
    for test_name, result in results.items():
        print(f"{test_name}: {'✅ PASSED' if result else '❌ FAILED'}")
    print(f"\n📊 Overall: {passed}/{len(results)} tests passed")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
