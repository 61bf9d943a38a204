# core/records.py
"""
Self-describing result files.

CSV: `# ` comment lines carry the artifact version, seed and the full config
as JSON, then the write time; then a header row and one row per record.
JSONL: the first line is {"header": {...}} (no timestamp), then one object per
record. Column order is the first-seen key order; new keys are only appended.
"""
import csv
import json
import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Union

from core.settings import ARTIFACT_VERSION

logger = logging.getLogger(__name__)

OutputFormat = Literal["csv", "jsonl"]


def _columns(rows: List[Dict[str, Any]]) -> List[str]:
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    return columns


def json_safe(value: Any) -> Any:
    """Non-finite floats become None so the result is strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


def _cell(value: Any) -> Any:
    if isinstance(value, (list, dict, tuple)):
        return json.dumps(value, sort_keys=True)
    if value is None:
        return ""
    return value


def make_header(config: Dict[str, Any], seed: Optional[int], kind: str) -> Dict[str, Any]:
    return {"artifact_version": ARTIFACT_VERSION, "kind": kind, "seed": seed, "config": config}


def write_records(
    path: Union[str, Path],
    rows: Iterable[Dict[str, Any]],
    header: Dict[str, Any],
    fmt: OutputFormat = "csv",
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = list(rows)
    if fmt == "jsonl":
        with path.open("w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps({"header": json_safe(header)}, sort_keys=True, default=str) + "\n")
            for row in rows:
                f.write(json.dumps(json_safe(row), default=str) + "\n")
    elif fmt == "csv":
        columns = _columns(rows)
        with path.open("w", encoding="utf-8", newline="") as f:
            f.write(f"# {json.dumps(header, sort_keys=True, default=str)}\n")
            f.write(f"# written_at={datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row.get(c)) for c in columns])
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    logger.info(f"Wrote {len(rows)} record(s) to {path}")
    return path


def read_records(path: Union[str, Path]) -> tuple:
    """Returns (header, rows); CSV cells come back as strings."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if path.suffix == ".jsonl":
        header = json.loads(lines[0])["header"]
        return header, [json.loads(line) for line in lines[1:] if line]
    header = json.loads(lines[0][2:])
    body = [line for line in lines if not line.startswith("#")]
    reader = csv.DictReader(body)
    return header, list(reader)
