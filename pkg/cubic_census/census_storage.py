from __future__ import annotations

import csv
import json
import logging
from copy import deepcopy
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .census_errors import MalformedInputError
from .census_models import CensusReport
from .census_utils import DATA_DIR

LOGGER = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "cubic-census-checkpoint"
METADATA_KEYS = ("run_metadata",)


def ensure_storage(directory: Path | None = None) -> Path:
    target = directory or DATA_DIR
    target.mkdir(parents=True, exist_ok=True)
    return target


def load_json_file(path: Path, default: Any) -> Any:
    if not path.exists():
        return deepcopy(default)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, OSError):
        return deepcopy(default)


def write_json_file(path: Path, payload: Any) -> None:
    ensure_storage(path.parent)
    temporary = path.with_name(path.name + ".tmp")
    temporary.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    temporary.replace(path)


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def default_report_path(q: int, mode: str) -> Path:
    return DATA_DIR / f"census_q{q}_{mode}.json"


def write_report(report: CensusReport, path: Path) -> Path:
    write_json_file(path, report)
    LOGGER.info("Wrote report for q=%s to %s", report["q"], path)
    return path


REQUIRED_REPORT_FIELDS: dict[str, type | tuple[type, ...]] = {
    "q": int,
    "mode": str,
    "total_indexed": int,
    "visited": int,
    "smooth_count": int,
    "point_sum": int,
    "trace_histogram": dict,
    "all_forms_point_sum": int,
    "findings": list,
    "disagreement_count": int,
    "nonintegral_count": int,
}
OPTIONAL_REPORT_FIELDS: dict[str, type | tuple[type, ...]] = {
    "window": (list, type(None)),
    "average": (dict, type(None)),
    "line_histogram": (dict, type(None)),
    "confidence_interval": (dict, type(None)),
    "config": dict,
}


def _has_type(value: Any, expected: type | tuple[type, ...]) -> bool:
    if isinstance(value, bool):
        return expected is bool
    return isinstance(value, expected)


def load_report(path: Path) -> CensusReport:
    payload = load_json_file(path, None)
    if not isinstance(payload, dict):
        raise MalformedInputError(f"{path} is not a readable report file")
    missing = [key for key in REQUIRED_REPORT_FIELDS if key not in payload]
    if missing:
        raise MalformedInputError(f"{path} is missing report fields: {', '.join(missing)}")
    fields = {**REQUIRED_REPORT_FIELDS, **OPTIONAL_REPORT_FIELDS}
    mistyped = [key for key, expected in fields.items() if key in payload and not _has_type(payload[key], expected)]
    if mistyped:
        raise MalformedInputError(f"{path} has report fields of the wrong type: {', '.join(mistyped)}")
    return payload


def report_without_metadata(report: CensusReport | dict[str, Any]) -> dict[str, Any]:
    return {key: value for key, value in report.items() if key not in METADATA_KEYS}


def write_checkpoint(path: Path, config_hash: str, partitions: list[dict[str, Any]]) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "config_hash": config_hash,
        "written_at": utc_now_iso(),
        "partitions": [
            {
                "start": str(partition["start"]),
                "stop": str(partition["stop"]),
                "next_index": str(partition["next_index"]),
                "tally": partition["tally"],
            }
            for partition in partitions
        ],
    }
    write_json_file(path, payload)
    LOGGER.info("Checkpoint written to %s", path)


def load_checkpoint(path: Path) -> dict[str, Any]:
    payload = load_json_file(path, None)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise MalformedInputError(f"{path} is not a census checkpoint")
    try:
        partitions = [
            {
                "start": int(item["start"]),
                "stop": int(item["stop"]),
                "next_index": int(item["next_index"]),
                "tally": item["tally"],
            }
            for item in payload["partitions"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInputError(f"{path} has malformed partition records") from exc
    return {"config_hash": str(payload.get("config_hash", "")), "partitions": partitions}


def _write_histogram(path: Path, header: str, histogram: dict[str, int]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([header, "count"])
        for key in sorted(histogram, key=int):
            writer.writerow([key, histogram[key]])


def export_histogram_csv(report: CensusReport, prefix: Path) -> list[Path]:
    ensure_storage(prefix.parent)
    written = []
    traces_path = prefix.with_name(prefix.name + "_traces.csv")
    _write_histogram(traces_path, "t", report["trace_histogram"])
    written.append(traces_path)
    if report.get("line_histogram") is not None:
        lines_path = prefix.with_name(prefix.name + "_lines.csv")
        _write_histogram(lines_path, "lines", report["line_histogram"] or {})
        written.append(lines_path)
    return written
