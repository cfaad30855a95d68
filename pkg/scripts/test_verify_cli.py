#!/usr/bin/env python3
"""
Command-line tests
Argument parsing, config overrides and exit codes of verify.py
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import json
from math import pi

import pytest

import verify
from api.schemas.verification import CheckRecord, ReportSummary, VerificationReport
from api.utils.report import parse_report


def test_parser_accepts_repeated_n():
    args = verify.build_parser().parse_args(["kernel", "--n", "3", "--n", "4", "--ell", "1", "--save"])
    assert args.suite == "kernel"
    assert args.n_values == [3, 4]
    overrides = verify.overrides_from_args(args)
    assert overrides["suites"] == ["kernel"]
    assert overrides["persist"] is True
    assert "mu" not in overrides


def test_parser_rejects_unknown_suite():
    with pytest.raises(SystemExit):
        verify.build_parser().parse_args(["nonsense"])


def test_mu_components_default_separately():
    args = verify.build_parser().parse_args(["barnes", "--mu-re", "0.5"])
    assert verify.overrides_from_args(args)["mu"] == {"re": 0.5, "im": pi}
    args = verify.build_parser().parse_args(["barnes", "--mu-im", "1.0", "--tol", "1e-9"])
    overrides = verify.overrides_from_args(args)
    assert overrides["mu"] == {"re": 0.0, "im": 1.0}
    assert overrides["quadrature"] == {"tol": 1e-9}


def test_passing_run_exits_zero(tmp_path):
    out = tmp_path / "report.json"
    code = verify.main(["detm", "--n", "2", "--seed", "9", "--out", str(out)])
    assert code == verify.EXIT_PASS
    report = parse_report(out.read_text(encoding="utf-8"))
    assert report.summary.status == "pass"
    assert report.config_echo["seed"] == 9


def test_text_format_goes_to_stdout(capsys):
    code = verify.main(["spectrum", "--n", "3", "--format", "text"])
    assert code == verify.EXIT_PASS
    assert "PASS: 4/4 checks passed, 0 failed" in capsys.readouterr().out


def test_failing_run_exits_one(monkeypatch, capsys):
    failing = VerificationReport(
        config_echo={"suites": ["detm"]},
        checks=[CheckRecord(check_id="detm/n=1/sample=0", anchor="detm-product", suite="detm", passed=False)],
        summary=ReportSummary(total=1, passed=0, failed=1, status="fail"),
    )
    monkeypatch.setattr(verify, "run_suite", lambda config: failing)
    assert verify.main(["detm"]) == verify.EXIT_FAIL
    assert json.loads(capsys.readouterr().out)["summary"]["failed"] == 1


def test_bad_config_exits_two(tmp_path):
    assert verify.main(["detm", "--config", str(tmp_path / "missing.json")]) == verify.EXIT_ERROR
    assert verify.main(["barnes", "--mu-im", "7.0"]) == verify.EXIT_ERROR


def test_infrastructure_error_exits_two(monkeypatch):
    def broken(config):
        raise RuntimeError("worker pool died")

    monkeypatch.setattr(verify, "run_suite", broken)
    assert verify.main(["detm"]) == verify.EXIT_ERROR


def main():
    """Run the command-line tests that need no fixtures"""
    print("🧪 Starting command-line tests...\n")

    tests = [
        ("Parser", test_parser_accepts_repeated_n),
        ("Unknown Suite", test_parser_rejects_unknown_suite),
        ("mu Overrides", test_mu_components_default_separately),
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
