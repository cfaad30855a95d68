#!/usr/bin/env python3
"""
Run store database tests
Table creation, storing reports, listing recent runs and reading them back
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pytest
from sqlalchemy import create_engine, inspect
from sqlalchemy.exc import IntegrityError
from sqlalchemy.orm import sessionmaker
from sqlalchemy.pool import StaticPool

from api.schemas.verification import CheckRecord, ReportSummary, VerificationReport
from api.utils.orchestrator import RunStore
from db import database
from db.database import init_db
from db.models import VerificationRun


def make_session():
    engine = create_engine("sqlite://", connect_args={"check_same_thread": False}, poolclass=StaticPool)
    init_db(bind=engine)
    return engine, sessionmaker(autocommit=False, autoflush=False, bind=engine)()


def make_report(status="pass"):
    passed = status == "pass"
    return VerificationReport(
        config_echo={"suites": ["detm", "spectrum"], "seed": 42},
        checks=[CheckRecord(check_id="detm/n=1/sample=0", anchor="detm-product", suite="detm",
                            residual=0.0, tolerance=0.0, passed=passed)],
        summary=ReportSummary(total=1, passed=int(passed), failed=int(not passed), status=status),
        environment={"seed": 42},
    )


@pytest.fixture
def db():
    engine, session = make_session()
    try:
        yield session
    finally:
        session.close()
        engine.dispose()


def test_tables_are_created():
    engine, session = make_session()
    try:
        assert "verification_runs" in inspect(engine).get_table_names()
    finally:
        session.close()


def test_save_and_get(db):
    store = RunStore(db)
    row = store.save("run-1", make_report())
    assert row.id is not None
    assert row.suites == ["detm", "spectrum"]
    assert row.status == "pass" and row.passed == 1 and row.failed == 0
    assert row.created_at is not None

    report = store.get("run-1")
    assert report.summary.status == "pass"
    assert report.checks[0].check_id == "detm/n=1/sample=0"
    assert store.get("missing") is None


def test_recent_is_newest_first(db):
    store = RunStore(db)
    for i, status in enumerate(["pass", "fail", "pass"]):
        store.save(f"run-{i}", make_report(status))
    recent = store.recent(limit=2)
    assert [r.run_id for r in recent] == ["run-2", "run-1"]
    assert recent[1].status == "fail"


def test_run_ids_are_unique(db):
    store = RunStore(db)
    store.save("run-1", make_report())
    with pytest.raises(IntegrityError):
        store.save("run-1", make_report())
    db.rollback()
    assert db.query(VerificationRun).count() == 1


def main():
    """Check the configured database, then run the store tests on a throwaway sqlite one"""
    print("🧪 Starting database tests...\n")

    def check_connection():
        assert database.test_connection(), f"cannot reach {database.DATABASE_URL}"

    def with_session(test_func):
        def run():
            engine, session = make_session()
            try:
                test_func(session)
            finally:
                session.close()
                engine.dispose()
        return run

    tests = [
        ("Connection", check_connection),
        ("Table Creation", test_tables_are_created),
        ("Save and Get", with_session(test_save_and_get)),
        ("Recent Runs", with_session(test_recent_is_newest_first)),
        ("Unique Run Ids", with_session(test_run_ids_are_unique)),
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
