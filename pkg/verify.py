# verify.py
"""
Command-line entry point of the verification lab.

    python verify.py barnes --seed 7 --format text
    python verify.py all --config run.json --out report.json --save

Exit status: 0 when every check passes, 1 when a check fails, 2 on a
configuration or infrastructure error.
"""

import argparse
import logging
import os
import sys
import uuid
from math import pi
from typing import Any, Dict, List, Optional

from api.schemas.verification import SUITE_NAMES
from api.utils.config import load_config, load_environment
from api.utils.errors import ConfigError
from api.utils.orchestrator import RunStore, run_suite
from api.utils.report import emit_report

logger = logging.getLogger(__name__)

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verify", description="qKZ level-zero verification lab")
    parser.add_argument("suite", choices=list(SUITE_NAMES) + ["all"], help="suite to run")
    parser.add_argument("--config", help="JSON config file mirroring RunConfig")
    parser.add_argument("--n", type=int, action="append", dest="n_values", help="n (repeatable)")
    parser.add_argument("--ell", type=int, action="append", dest="ell_values", help="l (repeatable)")
    parser.add_argument("--mu-re", type=float, help="real part of mu")
    parser.add_argument("--mu-im", type=float, help="imaginary part of mu, in [0, 2pi)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--tol", type=float, help="quadrature tolerance")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", help="report path (stdout when omitted)")
    parser.add_argument("--format", choices=["json", "text"])
    parser.add_argument("--save", action="store_true", help="store the report in the run database")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "suites": [args.suite],
        "n_values": args.n_values,
        "ell_values": args.ell_values,
        "seed": args.seed,
        "workers": args.workers,
        "output": args.out,
        "format": args.format,
    }
    if args.save:
        out["persist"] = True
    if args.tol is not None:
        out["quadrature"] = {"tol": args.tol}
    if args.mu_re is not None or args.mu_im is not None:
        out["mu"] = {
            "re": args.mu_re if args.mu_re is not None else 0.0,
            "im": args.mu_im if args.mu_im is not None else pi,
        }
    return out


def main(argv: Optional[List[str]] = None) -> int:
    load_environment()
    logging.basicConfig(
        level=os.getenv("LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, overrides=overrides_from_args(args))
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_ERROR

    try:
        report = run_suite(config)
        emit_report(report, fmt=config.format, path=config.output)
        if config.persist:
            from db.database import SessionLocal, init_db

            init_db()
            db = SessionLocal()
            try:
                RunStore(db).save(str(uuid.uuid4()), report)
            finally:
                db.close()
    except Exception as e:
        logger.error(f"Run aborted: {type(e).__name__}: {e}")
        return EXIT_ERROR

    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
