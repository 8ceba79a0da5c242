"""检查点读写测试。"""

import struct

import numpy as np
import pytest

from core.checkpoint import FORMAT_VERSION, MAGIC, dumps_state, load_state, loads_state, save_state
from core.errors import CheckpointError
from core.robust_hw import HwParams, HwState
from core.sofia_online import StreamState, step
from models.configs import OnlineConfig, RobustConfig


def _state(rng):
    rank, period, shape = 3, 4, (5, 2, 3)
    params = HwParams(rng.uniform(0, 1, rank), rng.uniform(0, 1, rank), rng.uniform(0, 1, rank))
    hw = HwState(rng.standard_normal(rank), rng.standard_normal(rank), rng.standard_normal((period, rank)), params)
    return StreamState(
        nontemporal=tuple(rng.standard_normal((s, rank)) for s in shape),
        temporal=rng.standard_normal((period, rank)),
        hw=hw,
        error_scale=rng.uniform(0.01, 1.0, shape),
        config=OnlineConfig(mu=0.02, lambda1=0.1, robust=RobustConfig(phi=0.05), preclean=False),
        t=57,
    )


def _assert_same(a, b):
    assert a.t == b.t
    assert a.config == b.config
    assert len(a.nontemporal) == len(b.nontemporal)
    for x, y in zip(a.nontemporal, b.nontemporal):
        np.testing.assert_array_equal(x, y)
    for name in ("temporal", "error_scale"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    for name in ("level", "trend", "seasonal"):
        np.testing.assert_array_equal(getattr(a.hw, name), getattr(b.hw, name))
    for name in ("alpha", "beta", "gamma"):
        np.testing.assert_array_equal(getattr(a.hw.params, name), getattr(b.hw.params, name))


def test_round_trip_is_bit_exact(rng):
    state = _state(rng)
    _assert_same(state, loads_state(dumps_state(state)))


def test_restored_state_continues_identically(rng):
    state = _state(rng)
    restored = loads_state(dumps_state(state))
    y = rng.standard_normal(state.slice_shape)
    mask = rng.random(state.slice_shape) < 0.5
    out_a, _ = step(state, y, mask)
    out_b, _ = step(restored, y, mask)
    np.testing.assert_array_equal(out_a.imputed, out_b.imputed)


def test_save_and_load_file(tmp_path, rng):
    state = _state(rng)
    path = tmp_path / "state.bin"
    save_state(state, str(path))
    assert path.read_bytes()[:8] == MAGIC
    assert not (tmp_path / "state.bin.tmp").exists()
    _assert_same(state, load_state(str(path)))


def test_bad_magic(rng):
    data = bytearray(dumps_state(_state(rng)))
    data[:8] = b"NOTSOFIA"
    with pytest.raises(CheckpointError):
        loads_state(bytes(data))


def test_unsupported_version(rng):
    data = bytearray(dumps_state(_state(rng)))
    data[8:12] = struct.pack("<I", FORMAT_VERSION + 1)
    with pytest.raises(CheckpointError):
        loads_state(bytes(data))


def test_truncated_payload(rng):
    data = dumps_state(_state(rng))
    with pytest.raises(CheckpointError):
        loads_state(data[:40])


def test_too_short():
    with pytest.raises(CheckpointError):
        loads_state(b"SOF")


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_state(str(tmp_path / "absent.bin"))
