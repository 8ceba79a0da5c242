"""
Sofia - 运行产物

steps.csv（逐步记录）与各类 JSON 汇总；所有文件先写 .tmp 再 os.replace。
"""

import csv
import io
import json
import logging
import os
import threading
from typing import Any, Dict, List, Sequence

from models.reports import StepRecord

logger = logging.getLogger(__name__)

STEPS_FILE_NAME = "steps.csv"
SUMMARY_FILE_NAME = "summary.json"
STATE_FILE_NAME = "state.bin"
STEP_COLUMNS = ("t", "nre", "step_ms", "n_observed", "n_outliers_flagged")
FORMAT_VERSION = 1

_write_lock = threading.Lock()


def write_text_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp_path = path + ".tmp"
    with _write_lock:
        with open(tmp_path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)


def write_json(path: str, data: Dict[str, Any]) -> None:
    payload = {"version": FORMAT_VERSION, **data}
    write_text_atomic(path, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")
    logger.info(f"Sofia: 已写入 {path}")


def read_json(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_steps_csv(path: str, records: Sequence[StepRecord], omit_timing: bool = False) -> None:
    """逐步记录写成 CSV；omit_timing 为真时 step_ms 留空，文件与计时无关。"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(STEP_COLUMNS)
    for record in records:
        writer.writerow(
            [
                _cell(record.t),
                _cell(record.nre),
                "" if omit_timing else _cell(record.step_ms),
                _cell(record.n_observed),
                _cell(record.n_outliers_flagged),
            ]
        )
    write_text_atomic(path, buffer.getvalue())
    logger.info(f"Sofia: 已写入 {path}（{len(records)} 步）")


def read_steps_csv(path: str) -> List[StepRecord]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    return [
        StepRecord(
            t=int(row["t"]),
            nre=float(row["nre"]) if row["nre"] else None,
            step_ms=float(row["step_ms"]) if row["step_ms"] else None,
            n_observed=int(row["n_observed"]),
            n_outliers_flagged=int(row["n_outliers_flagged"]),
        )
        for row in rows
    ]
