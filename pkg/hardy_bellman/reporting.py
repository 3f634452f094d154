"""
Report Writer
Persists RunReports as JSON plus one CSV per named series and prints the run summary.
Files are written to a temp file in the target directory and renamed into place.
"""

import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .models import RunReport

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


def _jsonable(value: Any) -> Any:
    """Plain Python types for json; floats keep their shortest round-trip repr."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def report_dict(report: RunReport, series_files: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
    """Fixed-order dictionary form of a report (wall time last)."""
    return {
        "command": report.command,
        "version": report.version,
        "inputs": _jsonable(report.inputs),
        "results": _jsonable(report.results),
        "tolerances": _jsonable(report.tolerances),
        "series": dict(series_files or {name: "" for name in report.series}),
        "passed": report.passed,
        "wall_time": float(report.wall_time),
    }


def series_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def atomic_write(path: Path, text: str):
    """Write text to path via a sibling temp file and os.replace."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: RunReport, out_dir: Path) -> List[Path]:
    """
    Write <command>_report.json and <command>_<series>.csv files.

    Returns:
        Paths written, JSON first
    """
    out_dir = Path(out_dir)
    series_files: Dict[str, str] = {}
    written: List[Path] = []
    for name, frame in report.series.items():
        csv_path = out_dir / f"{report.command}_{name}.csv"
        atomic_write(csv_path, series_csv(frame))
        series_files[name] = csv_path.name
        written.append(csv_path)

    json_path = out_dir / f"{report.command}_report.json"
    atomic_write(json_path, json.dumps(report_dict(report, series_files), indent=2) + "\n")
    logger.info(f"Wrote {json_path} and {len(series_files)} series file(s)")
    return [json_path] + written


def scalar_results(report: RunReport) -> Dict[str, Any]:
    """The part of a report that must reproduce bit for bit."""
    return {
        "results": _jsonable(report.results),
        "series": {name: series_csv(frame) for name, frame in report.series.items()},
    }


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.12g}"
    return str(value)


def print_summary(report: RunReport):
    """Human-readable summary of a finished run."""
    print(f"\n{'=' * 60}")
    print(f"[DONE] {report.command.upper()}")
    print(f"{'=' * 60}")
    for key, value in report.inputs.items():
        if isinstance(value, (list, dict)):
            continue
        print(f"[INPUT] {key}: {_fmt(value)}")
    for key, value in report.results.items():
        if isinstance(value, dict):
            status = value.get("passed")
            tag = "[OK]" if status else "[FAIL]" if status is False else "[INFO]"
            print(f"{tag} {key}: {value.get('detail', '')}")
        elif isinstance(value, list):
            print(f"[RESULT] {key}: {len(value)} entries")
        else:
            print(f"[RESULT] {key}: {_fmt(value)}")
    for name, frame in report.series.items():
        print(f"[SERIES] {name}: {len(frame)} rows")
    if report.passed is not None:
        print(f"[STATS] Acceptance: {'PASSED' if report.passed else 'FAILED'}")
    print(f"[TIME] Wall time: {report.wall_time:.2f}s")
