"""Holt-Winters 与鲁棒统计量测试。"""

import numpy as np
import pytest

from core.errors import DimensionError, InputError, InsufficientHistoryError
from core.robust_hw import (
    HwParams,
    HwState,
    _fit_column,
    biweight_rho,
    huber_psi,
    hw_fit,
    hw_forecast,
    hw_sse,
    hw_update,
    initial_components,
)


def _generate(rng, m, seasons, alpha, beta, gamma, noise):
    """按加性 HW 递推生成一列数据，返回 (序列, 一步误差平方和)。"""
    level = rng.uniform(-1, 1)
    trend = rng.uniform(-0.1, 0.1)
    seasonal = list(rng.uniform(-1, 1, size=m))
    ys = []
    sse = 0.0
    for _ in range(m * seasons):
        s_old = seasonal[-m]
        e = rng.normal(0.0, noise)
        y = level + trend + s_old + e
        sse += e * e
        new_level = alpha * (y - s_old) + (1 - alpha) * (level + trend)
        seasonal.append(gamma * (y - level - trend) + (1 - gamma) * s_old)
        trend = beta * (new_level - level) + (1 - beta) * trend
        level = new_level
        ys.append(y)
    return np.array(ys), sse


class TestRobustFunctions:
    def test_huber_inside_band_is_identity(self):
        assert huber_psi(1.5, 2.0) == 1.5
        assert huber_psi(-0.3, 2.0) == -0.3

    def test_huber_clips_outside_band(self):
        assert huber_psi(10.0, 2.0) == 2.0
        assert huber_psi(-10.0, 2.0) == -2.0

    def test_huber_vectorized(self):
        np.testing.assert_array_equal(huber_psi(np.array([-3.0, 0.5, 3.0]), 1.0), [-1.0, 0.5, 1.0])

    def test_biweight_zero_and_saturation(self):
        assert biweight_rho(0.0, 2.0, 2.52) == 0.0
        assert biweight_rho(2.0, 2.0, 2.52) == pytest.approx(2.52)
        assert biweight_rho(50.0, 2.0, 2.52) == 2.52

    def test_biweight_interior_value(self):
        # x/k = 0.5 → 1-(1-0.25)^3 = 0.578125
        assert biweight_rho(1.0, 2.0, 2.52) == pytest.approx(2.52 * 0.578125)


class TestHwRecursion:
    def _state(self, rng, rank=3, m=6):
        params = HwParams(rng.uniform(0, 1, rank), rng.uniform(0, 1, rank), rng.uniform(0, 1, rank))
        return HwState(
            level=rng.standard_normal(rank),
            trend=rng.standard_normal(rank),
            seasonal=rng.standard_normal((m, rank)),
            params=params,
        )

    def test_forecast_matches_unrolled_recursion(self, rng):
        state = self._state(rng)
        m = state.period
        for _ in range(17):
            state = hw_update(state, rng.standard_normal(3))
        for h in range(1, 2 * m + 1):
            k = (h - 1) // m
            lag = h - m * (k + 1)  # 在最近一季内：-m+1..0
            expected = state.level + h * state.trend + state.seasonal[m - 1 + lag]
            np.testing.assert_allclose(hw_forecast(state, h), expected, atol=1e-12)

    def test_forecast_is_periodic_without_trend(self, rng):
        state = self._state(rng)
        state = HwState(state.level, np.zeros(3), state.seasonal, state.params)
        for h in range(1, 7):
            np.testing.assert_allclose(hw_forecast(state, h), hw_forecast(state, h + state.period))

    def test_update_matches_scalar_equations(self):
        params = HwParams.uniform(1, 0.5, 0.2, 0.3)
        state = HwState(level=[1.0], trend=[0.5], seasonal=[[0.1], [0.2], [0.3]], params=params)
        new = hw_update(state, [2.0])
        level = 0.5 * (2.0 - 0.1) + 0.5 * 1.5
        assert new.level[0] == pytest.approx(level)
        assert new.trend[0] == pytest.approx(0.2 * (level - 1.0) + 0.8 * 0.5)
        assert new.seasonal[-1, 0] == pytest.approx(0.3 * (2.0 - 1.5) + 0.7 * 0.1)
        np.testing.assert_array_equal(new.seasonal[:2, 0], [0.2, 0.3])
        # 输入状态不变
        assert state.level[0] == 1.0

    def test_forecast_requires_positive_horizon(self, rng):
        with pytest.raises(InputError):
            hw_forecast(self._state(rng), 0)

    def test_update_rank_mismatch(self, rng):
        with pytest.raises(DimensionError):
            hw_update(self._state(rng), np.ones(2))

    def test_params_must_be_in_unit_box(self):
        with pytest.raises(InputError):
            HwParams.uniform(2, 1.2, 0.1, 0.1)


class TestHwFit:
    def test_sse_zero_for_exact_periodic_series(self):
        m = 4
        pattern = np.array([1.0, -1.0, 2.0, 0.0])
        series = np.tile(pattern, 3) + 5.0
        level, trend, seasonal = initial_components(series, m)
        assert level == pytest.approx(5.5)
        assert trend == pytest.approx(0.0)
        sse, errors = hw_sse(series, m, 0.0, 0.0, 0.0, level, trend, seasonal)
        assert sse == pytest.approx(0.0, abs=1e-20)
        assert errors.shape == (12,)

    def test_fit_beats_generating_parameters(self, rng):
        m = 6
        for _ in range(3):
            series, true_sse = _generate(rng, m, 5, alpha=0.35, beta=0.05, gamma=0.35, noise=0.1)
            params, _, fit_sse = _fit_column(series, m)
            assert fit_sse <= 1.01 * true_sse
            assert np.all((params >= 0) & (params <= 1))

    def test_fit_returns_state_at_end_of_series(self, rng):
        m = 6
        columns = [_generate(rng, m, 5, 0.35, 0.05, 0.35, 0.05)[0] for _ in range(3)]
        series = np.stack(columns, axis=1)
        state, params = hw_fit(series, m)
        assert state.rank == 3 and state.period == m
        assert params.rank == 3
        # 末状态的一步预测应接近最后一季的水平
        assert np.all(np.isfinite(hw_forecast(state, 1)))

    def test_fit_requires_three_seasons(self):
        with pytest.raises(InsufficientHistoryError):
            hw_fit(np.zeros((17, 2)), 6)

    def test_fit_rejects_non_finite(self):
        series = np.zeros((18, 1))
        series[3, 0] = np.nan
        with pytest.raises(InputError):
            hw_fit(series, 6)

    def test_fit_rejects_short_period(self):
        with pytest.raises(InputError):
            hw_fit(np.zeros((12, 1)), 1)
