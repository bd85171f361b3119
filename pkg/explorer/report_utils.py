"""
report_utils.py

Summary:
- run_pipeline: 33% stratified holdout, exploration on the rest, then the baseline model and the
  selected ensemble are both refit on the training rows and scored on the holdout.
- RunReport: the YAML document written by `run` (schema in docs/report_schema.md).
- summarize_reports: per-report metrics plus mean / median error reduction for `evaluate`.
"""

import logging
import math
from datetime import datetime, timezone
from typing import Any, Optional, Tuple, TypedDict

import numpy as np

from .config_utils import ExplorerConfig
from .data_utils import Dataset, derive_seed, holdout_split
from .errors import DataError
from .estimator_utils import baseline_estimator, fit_dataset
from .explore_utils import Clock, RunResult, run
from .metric_utils import error_reduction, metric_name, score
from .policy_utils import PolicyWeights, QPolicy, default_policy

logger = logging.getLogger(__name__)


class MemberReport(TypedDict):
    node_id: int
    estimator: str
    hyperparams: dict[str, Any]
    lineage: list[str]
    cv_error: float


class StepReport(TypedDict):
    step: int
    action: str
    elapsed: float
    e_min: float
    reward: float
    noop: bool


class RunReport(TypedDict):
    dataset: str
    task: str
    t_max: float
    iterations: Optional[int]
    seed: int
    generated_at: str
    metric: str
    baseline_metric: float
    ensemble_metric: float
    error_reduction: Optional[float]
    error_reduction_defined: bool
    baseline_cv_error: float
    ensemble_cv_error: float
    members: list[MemberReport]
    steps: list[StepReport]
    config: dict[str, Any]


REPORT_KEYS = tuple(RunReport.__annotations__)


def _plain(value: Any) -> Any:
    """numpy scalars to builtins so the YAML stays free of python tags."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def build_report(
    result: RunResult,
    d: Dataset,
    t_max: float,
    iterations: Optional[int],
    seed: int,
    baseline_metric: float,
    ensemble_metric: float,
    config: ExplorerConfig,
) -> RunReport:
    reduction = error_reduction(baseline_metric, ensemble_metric, d.task)
    members: list[MemberReport] = [
        {
            "node_id": m.node_id,
            "estimator": m.estimator.value,
            "hyperparams": _plain(dict(m.hyperparams)),
            "lineage": [spec.describe() for spec in m.chain],
            "cv_error": float(m.cv_error),
        }
        for m in result.ensemble.members
    ]
    return {
        "dataset": d.name,
        "task": d.task.value,
        "t_max": float(t_max),
        "iterations": iterations,
        "seed": seed,
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "metric": metric_name(d.task),
        "baseline_metric": float(baseline_metric),
        "ensemble_metric": float(ensemble_metric),
        "error_reduction": None if reduction is None else float(reduction),
        "error_reduction_defined": reduction is not None,
        "baseline_cv_error": float(result.baseline_error),
        "ensemble_cv_error": float(result.e_min),
        "members": members,
        "steps": [s.to_dict() for s in result.steps],
        "config": _plain(config.to_dict()),
    }


def run_pipeline(
    d: Dataset,
    t_max: float,
    seed: int,
    policy: Optional[PolicyWeights] = None,
    config: Optional[ExplorerConfig] = None,
    iterations: Optional[int] = None,
) -> Tuple[RunResult, RunReport]:
    config = config or ExplorerConfig()
    policy = policy or default_policy()
    train, test = holdout_split(d, config.holdout_fraction, seed)

    result = run(train, Clock(t_max, iterations), QPolicy(policy), config, seed)

    # same refit seed as model node 0
    baseline = fit_dataset(baseline_estimator(d.task), None, train, derive_seed(seed, "refit", 0))
    y_test = test.target.values
    baseline_metric = score(d.task, baseline.predict(test), y_test)
    ensemble_metric = score(d.task, result.ensemble.predict(test), y_test)
    logger.info(
        f"Holdout {metric_name(d.task)}: baseline={baseline_metric:.4f} ensemble={ensemble_metric:.4f}"
    )
    report = build_report(result, d, t_max, iterations, seed, baseline_metric, ensemble_metric, config)
    return result, report


def validate_report(report: Any, where: str = "report") -> RunReport:
    if not isinstance(report, dict):
        raise DataError(f"{where}: not a mapping")
    missing = [k for k in REPORT_KEYS if k not in report]
    if missing:
        raise DataError(f"{where}: missing keys {missing}")
    if not report["members"]:
        raise DataError(f"{where}: no ensemble members")
    if report["error_reduction_defined"] != (report["error_reduction"] is not None):
        raise DataError(f"{where}: error_reduction_defined disagrees with error_reduction")
    return report


# ---------------------------
# Evaluation table
# ---------------------------
def summarize_reports(reports: list[RunReport]) -> dict[str, Optional[float]]:
    reductions = [r["error_reduction"] for r in reports if r["error_reduction"] is not None]
    if not reductions:
        return {"mean": None, "median": None}
    return {"mean": float(np.mean(reductions)), "median": float(np.median(reductions))}


def _fmt(value: Optional[float], digits: int = 4) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    return f"{value:.{digits}f}"


def _percent(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{100.0 * value:.2f}%"


def format_table(reports: list[RunReport]) -> str:
    rows = [("dataset", "metric", "baseline", "ensemble", "reduction", "members")]
    for r in reports:
        rows.append(
            (
                r["dataset"],
                r["metric"],
                _fmt(r["baseline_metric"]),
                _fmt(r["ensemble_metric"]),
                _percent(r["error_reduction"]),
                str(len(r["members"])),
            )
        )
    if len(reports) > 1:
        summary = summarize_reports(reports)
        rows.append(("mean", "", "", "", _percent(summary["mean"]), ""))
        rows.append(("median", "", "", "", _percent(summary["median"]), ""))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows)
