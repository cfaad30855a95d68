from fastapi import APIRouter, HTTPException, Depends
from sqlalchemy.orm import Session
from typing import List
import logging
import uuid

from db.database import get_db
from api.schemas.verification import (
    RunConfig,
    VerificationReport,
    SuiteInfo,
    RunListItem,
    RunListResponse,
)
from api.utils.config import load_config
from api.utils.errors import ConfigError
from api.utils.orchestrator import RunStore, list_suites, run_suite

router = APIRouter()
logger = logging.getLogger(__name__)


@router.get("/verify/suites", response_model=List[SuiteInfo])
async def get_suites():
    """List the verification suites"""
    return [SuiteInfo(**s) for s in list_suites()]


@router.post("/verify", response_model=VerificationReport)
def verify(request: RunConfig, db: Session = Depends(get_db)):
    """Run the suites of a RunConfig and return the report"""
    try:
        config = load_config(data=request.model_dump(exclude_unset=True))
        report = run_suite(config)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=f"{e.field or 'config'}: {e}")
    except Exception as e:
        logger.error(f"Verification run failed: {e}")
        raise HTTPException(status_code=500, detail=f"Verification run failed: {str(e)}")

    if config.persist:
        RunStore(db).save(str(uuid.uuid4()), report)
    return report


@router.get("/runs", response_model=RunListResponse)
async def get_runs(limit: int = 50, db: Session = Depends(get_db)):
    """List stored runs, newest first"""
    runs = RunStore(db).recent(limit)
    return RunListResponse(
        runs=[RunListItem.model_validate(r) for r in runs],
        total=len(runs),
    )


@router.get("/runs/{run_id}", response_model=VerificationReport)
async def get_run(run_id: str, db: Session = Depends(get_db)):
    """Return one stored report"""
    report = RunStore(db).get(run_id)
    if not report:
        raise HTTPException(status_code=404, detail="Run not found")
    return report
