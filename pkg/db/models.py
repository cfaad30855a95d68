from sqlalchemy import Column, Integer, String, DateTime, JSON
from sqlalchemy.sql import func
from db.database import Base


class VerificationRun(Base):
    __tablename__ = "verification_runs"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(String(64), unique=True, index=True, nullable=False)
    suites = Column(JSON, nullable=False)  # ["barnes", "kernel"]
    status = Column(String(20), nullable=False)  # "pass", "fail"
    passed = Column(Integer, default=0)
    failed = Column(Integer, default=0)

    config = Column(JSON)  # RunConfig as dumped
    report = Column(JSON)  # full VerificationReport

    created_at = Column(DateTime(timezone=True), server_default=func.now())
