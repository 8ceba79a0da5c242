"""StreamState 检查点存储。

文件布局：8 字节魔数 b"SOFIAST\\x00" + 小端 uint32 格式版本 + numpy.savez 负载。
负载里所有数组均为 float64，OnlineConfig 以 JSON 字节嵌入；写入走临时文件 + os.replace。
"""

import io
import json
import logging
import os
import struct
import threading
import zipfile

import numpy as np

from models.configs import OnlineConfig

from .errors import CheckpointError
from .robust_hw import HwParams, HwState
from .sofia_online import StreamState

logger = logging.getLogger(__name__)

MAGIC = b"SOFIAST\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sI")

_save_lock = threading.Lock()


def _payload(state: StreamState) -> dict:
    arrays = {
        "temporal": state.temporal,
        "level": state.hw.level,
        "trend": state.hw.trend,
        "seasonal": state.hw.seasonal,
        "alpha": state.hw.params.alpha,
        "beta": state.hw.params.beta,
        "gamma": state.hw.params.gamma,
        "error_scale": state.error_scale,
        "t": np.array([state.t], dtype=np.int64),
        "config": np.frombuffer(state.config.model_dump_json().encode("utf-8"), dtype=np.uint8),
    }
    for n, matrix in enumerate(state.nontemporal):
        arrays[f"nontemporal_{n}"] = np.asarray(matrix, dtype=np.float64)
    return arrays


def dumps_state(state: StreamState) -> bytes:
    buffer = io.BytesIO()
    buffer.write(_HEADER.pack(MAGIC, FORMAT_VERSION))
    np.savez(buffer, **_payload(state))
    return buffer.getvalue()


def loads_state(data: bytes) -> StreamState:
    if len(data) < _HEADER.size:
        raise CheckpointError("检查点文件过短")
    magic, version = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"检查点魔数不符: {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"不支持的检查点版本 {version}（当前 {FORMAT_VERSION}）")
    try:
        with np.load(io.BytesIO(data[_HEADER.size:]), allow_pickle=False) as payload:
            arrays = {key: payload[key] for key in payload.files}
    except (OSError, ValueError, EOFError, zipfile.BadZipFile) as e:
        raise CheckpointError(f"检查点负载损坏: {e}") from e

    try:
        config = OnlineConfig.model_validate(json.loads(arrays["config"].tobytes().decode("utf-8")))
        count = sum(1 for key in arrays if key.startswith("nontemporal_"))
        nontemporal = tuple(arrays[f"nontemporal_{n}"] for n in range(count))
        params = HwParams(arrays["alpha"], arrays["beta"], arrays["gamma"])
        hw = HwState(level=arrays["level"], trend=arrays["trend"], seasonal=arrays["seasonal"], params=params)
        return StreamState(
            nontemporal=nontemporal,
            temporal=arrays["temporal"],
            hw=hw,
            error_scale=arrays["error_scale"],
            config=config,
            t=int(arrays["t"][0]),
        )
    except KeyError as e:
        raise CheckpointError(f"检查点缺少字段 {e}") from e


def save_state(state: StreamState, path: str) -> None:
    """原子写入检查点。"""
    data = dumps_state(state)
    tmp_path = path + ".tmp"
    with _save_lock:
        with open(tmp_path, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    logger.info(f"Sofia: 检查点已写入 {path}（t={state.t}，{len(data)} 字节）")


def load_state(path: str) -> StreamState:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise CheckpointError(f"无法读取检查点 {path}: {e}") from e
    return loads_state(data)
