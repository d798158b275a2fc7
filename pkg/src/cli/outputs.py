"""
Machine-readable run outputs: tidy CSV for plotting and JSON summaries
"""
import json
import math
from pathlib import Path
from typing import Any, Iterable, List
import numpy as np
import pandas as pd
from src.simulation.records import SimulationLog
from src.utils.logger import get_logger

logger = get_logger(__name__)

LOG_COLUMNS = [
    "k", "mode", "x1", "x2", "x3", "x4", "u", "trace_P", "statistic", "threshold",
    "fired", "torsion", "state_violation", "input_violation", "mpc_status",
]
PARAM_COLUMNS = ["k", "index", "true", "model", "estimate", "std"]

def log_frame(log: SimulationLog) -> pd.DataFrame:
    """One row per step with the columns of LOG_COLUMNS"""
    rows = []
    for r in log.records:
        rows.append({
            "k": r.k,
            "mode": r.mode.value,
            "x1": r.x[0], "x2": r.x[1], "x3": r.x[2], "x4": r.x[3],
            "u": r.u[0],
            "trace_P": r.trace_P,
            "statistic": r.statistic,
            "threshold": r.threshold,
            "fired": int(r.fired),
            "torsion": r.torsion,
            "state_violation": int(r.state_violation),
            "input_violation": int(r.input_violation),
            "mpc_status": r.mpc_status.value,
        })
    return pd.DataFrame(rows, columns=LOG_COLUMNS)

def params_frame(log: SimulationLog, indices: Iterable[int]) -> pd.DataFrame:
    """Long-format parameter traces: true, model, estimate and marginal std per index"""
    indices = list(indices)
    rows = []
    for r in log.records:
        for i in indices:
            rows.append({
                "k": r.k,
                "index": i,
                "true": r.z_true[i],
                "model": r.z_model[i],
                "estimate": r.z_hat[i],
                "std": math.sqrt(max(r.P_diag[i], 0.0)),
            })
    return pd.DataFrame(rows, columns=PARAM_COLUMNS)

def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, lineterminator="\n", na_rep="nan", encoding="utf-8")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path

def to_jsonable(value: Any) -> Any:
    """Convert numpy and float values to JSON types; NaN becomes null"""
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value

def write_json(payload: Any, path: Path) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(to_jsonable(payload), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    logger.info(f"Wrote {path}")
    return path

def write_run_outputs(log: SimulationLog, metrics, out_dir: Path, tracked: List[int]) -> List[Path]:
    """
    Write log.csv, params.csv, metrics.json and events.json

    Args:
        log: Run log
        metrics: MetricsReport of the run
        out_dir: Target directory (created if missing)
        tracked: Parameter indices for params.csv

    Returns:
        Paths written
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    return [
        write_csv(log_frame(log), out_dir / "log.csv"),
        write_csv(params_frame(log, tracked), out_dir / "params.csv"),
        write_json(metrics.to_dict(), out_dir / "metrics.json"),
        write_json([event.to_dict() for event in log.events], out_dir / "events.json"),
    ]
