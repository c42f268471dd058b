"""Jobs shared by the CLI and the API.

Each job takes validated inputs, writes its artifacts under one output
directory and returns (result dict, exit code). Numerical failures inside a
simulation are reported through the exit code; config errors are raised.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

from app.core.errors import EXIT_FAILURE, EXIT_NUMERICAL, EXIT_OK
from app.core.paths import gait_path, impacts_path, report_path, summary_path, trace_path
from app.schemas.optimizer import GaitSolution
from app.schemas.run_config import RunConfig
from app.services.acceptance_service import report_payload, run_acceptance
from app.services.alip.gait_optimizer_service import build_solution, optimize_gait
from app.services.config_service import save_gait_solution
from app.services.export_service import write_impacts_csv, write_json, write_trace_csv
from app.services.hybrid_sim_service import build_scenario, run_scenario, summarize

logger = logging.getLogger(__name__)

JobResult = Tuple[Dict[str, Any], int]


def optimize_job(cfg: RunConfig, out_dir: Optional[str | Path] = None) -> Tuple[GaitSolution, Dict[str, Any]]:
    """Raises InfeasibleGaitError before anything is written."""
    solution = optimize_gait(cfg.gait, cfg.optimizer, seed=cfg.seed)
    p = save_gait_solution(solution, gait_path(out_dir))
    logger.info("gait written to %s (rho=%.4f)", p, solution.spectral_radius)
    return solution, {
        "gait_file": str(p),
        "K": list(solution.policy.K),
        "u_star": solution.policy.u_star,
        "spectral_radius": solution.spectral_radius,
        "violation": solution.violation,
    }


def simulation_exit_code(summary: Dict[str, Any]) -> int:
    if summary.get("failure_kind") in ("diverged", "numerical"):
        return EXIT_NUMERICAL
    return EXIT_OK if summary.get("verdict") == "pass" else EXIT_FAILURE


def simulate_job(cfg: RunConfig, gait: Optional[GaitSolution] = None, out_dir: Optional[str | Path] = None) -> JobResult:
    result: Dict[str, Any] = {}
    if gait is None:
        gait, result["optimize"] = optimize_job(cfg, out_dir)
    else:
        # eigenvalues and orbit are recomputed for the gait as loaded
        gait = build_solution(gait.policy, gait.gait, cfg.optimizer)

    scn = build_scenario(cfg.robot, gait, cfg.scenario)
    trace = run_scenario(scn)
    summary = summarize(trace, scn)

    write_trace_csv(trace, trace_path(out_dir))
    write_impacts_csv(trace, impacts_path(out_dir))
    write_json(summary, summary_path(out_dir))

    code = simulation_exit_code(summary)
    result.update(
        {
            "trace_file": str(trace_path(out_dir)),
            "summary_file": str(summary_path(out_dir)),
            "steps_completed": summary["steps_completed"],
            "failure": summary["failure"],
            "verdict": summary["verdict"],
        }
    )
    logger.info("simulation %s: %d steps, verdict %s", cfg.preset, summary["steps_completed"], summary["verdict"])
    return result, code


def verify_job(
    configs: Sequence[RunConfig],
    gaits: Optional[Sequence[Optional[GaitSolution]]] = None,
    out_dir: Optional[str | Path] = None,
    *,
    max_workers: Optional[int] = None,
) -> JobResult:
    results = run_acceptance(configs, gaits, max_workers=max_workers)
    payload = report_payload(results)
    p = write_json(payload, report_path(out_dir))
    for r in results:
        logger.info("criterion %2d %-40s %s", r.criterion, r.name, "PASS" if r.passed else "FAIL")
    summary = {
        "report_file": str(p),
        "passed": payload["passed"],
        "failed": [r.criterion for r in results if not r.passed],
    }
    return summary, EXIT_OK if payload["passed"] else EXIT_FAILURE
