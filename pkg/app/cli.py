"""Command-line entry point.

Usage:
  python drswalk.py optimize --preset caseA --out runs/caseA
  python drswalk.py simulate --preset caseB --gait runs/caseB/gait.json --steps 50
  python drswalk.py verify --out runs/verify

Exit codes: 0 success, 1 stability/criterion failure or infeasible gait,
2 config error, 3 numerical failure. Every command is recorded in the run
ledger under the output directory; inputs are validated before anything is written.
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from sqlalchemy.orm import sessionmaker

from app.core.config import settings
from app.core.database import make_engine, make_session_factory, session_scope
from app.core.errors import EXIT_OK, ConfigError, NumericalError, exit_code_for
from app.core.presets import PRESETS
from app.db.init_db import init_db
from app.repositories import run_repo
from app.schemas.optimizer import GaitSolution
from app.schemas.run_config import RunConfig
from app.services.config_service import load_gait_solution, load_run_config
from app.services.run_service import optimize_job, simulate_job, verify_job

logger = logging.getLogger("drswalk")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drswalk", description="Biped walking on a swaying surface: gait design and simulation.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("optimize", "solve the footstep-policy optimization and write gait.json"),
        ("simulate", "run the full-order closed loop and write trace.csv / impacts.csv / summary.json"),
        ("verify", "run the acceptance suite and write acceptance.json"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON run config (sections: robot, gait, optimizer, scenario)")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="embedded parameter set used as the base")
        sp.add_argument("--out", help="output directory (default: config output_dir or DRSWALK_OUTPUT_DIR)")
        sp.add_argument("--seed", type=int, help="optimizer seed")
        if name in ("simulate", "verify"):
            sp.add_argument("--gait", help="gait.json from a previous optimize run (skips optimization)")
            sp.add_argument("--steps", type=int, help="override scenario.duration_steps")
            sp.add_argument("--dt", type=float, help="override scenario.physics_dt")
    return p


def configure_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    if args.seed is not None:
        out["seed"] = args.seed
    scenario: Dict[str, Any] = {}
    if getattr(args, "steps", None) is not None:
        scenario["duration_steps"] = args.steps
    if getattr(args, "dt", None) is not None:
        scenario["physics_dt"] = args.dt
    if scenario:
        out["scenario"] = scenario
    return out


def _verify_configs(args: argparse.Namespace) -> List[RunConfig]:
    overrides = _overrides(args)
    first = load_run_config(args.config, preset=args.preset, overrides=overrides)
    if first.preset in PRESETS:
        return [first]
    return [load_run_config(args.config, preset=name, overrides=overrides) for name in sorted(PRESETS)]


def _out_dir(args: argparse.Namespace, cfg: RunConfig) -> Path:
    return Path(args.out or cfg.output_dir or settings.output_dir)


def _ledger(out_dir: Path) -> sessionmaker:
    engine = make_engine(out_dir)
    init_db(engine)
    return make_session_factory(engine)


def run_tracked(
    kind: str,
    cfg: RunConfig,
    out_dir: Path,
    job: Callable[[], Tuple[Dict[str, Any], int]],
) -> int:
    """Open a ledger record, run job, close the record with its result and exit code."""
    factory = _ledger(out_dir)
    with session_scope(factory) as db:
        run_id = run_repo.open_run(
            db, kind=kind, preset=cfg.preset, seed=cfg.seed, config=cfg.model_dump(mode="json")
        ).id

    error: Optional[str] = None
    try:
        result, code = job()
    except (ConfigError, NumericalError) as e:
        code = exit_code_for(e)
        error = str(e) or type(e).__name__
        result = {"violation": e.violation} if hasattr(e, "violation") else {}
        logger.error("%s failed (exit %d): %s", kind, code, error)

    with session_scope(factory) as db:
        run_repo.close_run(db, run_id, result=result, error=error, exit_code=code)
    return code


def cmd_optimize(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, preset=args.preset, overrides=_overrides(args))
    out_dir = _out_dir(args, cfg)

    def job():
        _, result = optimize_job(cfg, out_dir)
        return result, EXIT_OK

    return run_tracked("optimize", cfg, out_dir, job)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, preset=args.preset, overrides=_overrides(args))
    gait: Optional[GaitSolution] = load_gait_solution(args.gait) if args.gait else None
    out_dir = _out_dir(args, cfg)
    return run_tracked("simulate", cfg, out_dir, lambda: simulate_job(cfg, gait, out_dir))


def cmd_verify(args: argparse.Namespace) -> int:
    configs = _verify_configs(args)
    gaits: Optional[List[Optional[GaitSolution]]] = None
    if args.gait:
        if len(configs) != 1:
            raise ConfigError("--gait needs a single case: pass --preset caseA or --preset caseB")
        gaits = [load_gait_solution(args.gait)]
    out_dir = _out_dir(args, configs[0])
    return run_tracked("verify", configs[0], out_dir, lambda: verify_job(configs, gaits, out_dir))


COMMANDS = {"optimize": cmd_optimize, "simulate": cmd_simulate, "verify": cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error("config error: %s", e)
        return e.exit_code
