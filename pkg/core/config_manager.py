"""
Sofia - 配置管理器
集中管理场景文件里的所有配置项，缺省值取推荐默认参数。
支持嵌套分组结构，兼容旧版扁平结构读取。
"""

import copy
import json
import logging
import os
from typing import List, Optional, Tuple

from pydantic import ValidationError

from models.configs import BatchConfig, CorruptionSpec, OnlineConfig, RobustConfig, SynthConfig

from .config_migration import migrate_flat_config
from .errors import ConfigurationError

logger = logging.getLogger(__name__)


def _deep_merge(base: dict, overlay: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class ConfigManager:
    """
    配置管理器 - 提供对场景配置的中心化访问。

    配置格式：
    {
        "name": "synthetic-recovery",
        "source": {"kind": "synthetic"},
        "synthetic": {"shape": [30, 30], "length": 90, ...},
        "model": {"rank": 3, "period": 30, "lambda3": 10.0, ...},
        "online": {"mu": 0.1, "phi": 0.01, ...},
        "corruption": {"missing_pct": 90, "outlier_pct": 20, "outlier_mag": 7},
        "ablation": {"vanilla_init": false, "preclean": true},
        "forecast": {"horizon": 0},
        "run": {"seed": 0, "repeats": 1, "checkpoint": false},
        "output": {"dir": "runs/synthetic-recovery", "omit_timing": false}
    }

    with_overrides(overrides) 返回叠加视图：读取时先查覆盖层，再查基础配置，
    基础配置不会被修改（命令行参数、消融开关、秩扫描都走这条路径）。
    """

    def __init__(self, config_data: dict, overrides: Optional[dict] = None):
        self._config = config_data or {}
        self._overrides = overrides or {}

    def with_overrides(self, overrides: dict) -> "ConfigManager":
        """返回叠加了 overrides 的配置视图；overrides 可以是扁平 key 或嵌套分组。"""
        layer = copy.deepcopy(overrides or {})
        migrate_flat_config(layer)
        return ConfigManager(self._config, _deep_merge(self._overrides, layer))

    def as_dict(self) -> dict:
        """合并后的完整配置（写入 summary.json 的配置回显）。"""
        return _deep_merge(self._config, self._overrides)

    def _get_grouped(self, group: str, key: str, default=None):
        """从分组中读取配置：覆盖层 → 嵌套结构 → 旧扁平 key。"""
        grp = self._overrides.get(group)
        if isinstance(grp, dict) and key in grp:
            return grp[key]
        grp = self._config.get(group)
        if isinstance(grp, dict) and key in grp:
            return grp[key]
        return self._config.get(key, default)

    # ========== 顶层配置 ==========

    @property
    def name(self) -> str:
        return self._overrides.get("name") or self._config.get("name", "scenario")

    # ========== source ==========

    @property
    def source_kind(self) -> str:
        """synthetic 或 triples。"""
        kind = self._get_grouped("source", "kind", None)
        if kind is None:
            kind = "triples" if self.source_path else "synthetic"
        if kind not in ("synthetic", "triples"):
            raise ConfigurationError(f"[{self.name}] 未知的数据源类型: {kind}")
        return kind

    @property
    def source_path(self) -> str:
        return self._get_grouped("source", "path", "") or ""

    @property
    def source_shape(self) -> Optional[List[int]]:
        """三元组文件声明的非时间模态形状；为空时由数据推断。"""
        shape = self._get_grouped("source", "shape", None)
        return [int(s) for s in shape] if shape else None

    @property
    def delimiter(self) -> str:
        return self._get_grouped("source", "delimiter", ",")

    @property
    def granularity(self) -> int:
        """时间分桶宽度（源时间单位）。"""
        return int(self._get_grouped("source", "granularity", 1))

    @property
    def log2_transform(self) -> bool:
        return bool(self._get_grouped("source", "log2", False))

    @property
    def standardize_mode(self) -> Optional[int]:
        mode = self._get_grouped("source", "standardize_mode", None)
        return None if mode is None else int(mode)

    # ========== synthetic ==========

    def synth_config(self, seed: Optional[int] = None) -> SynthConfig:
        group = dict(self._config.get("synthetic") or {})
        group.update(self._overrides.get("synthetic") or {})
        group["seed"] = self.seed if seed is None else seed
        return self._validated(SynthConfig, group)

    # ========== model ==========

    @property
    def rank(self) -> int:
        return int(self._get_grouped("model", "rank", self._get_grouped("synthetic", "rank", 3)))

    @property
    def period(self) -> int:
        period = self._get_grouped("model", "period", None)
        if period is None:
            period = self._get_grouped("source", "period", None)
        if period is None:
            period = self._get_grouped("synthetic", "period", 30)
        return int(period)

    @property
    def lambda1(self) -> float:
        return float(self._get_grouped("model", "lambda1", 1e-3))

    @property
    def lambda2(self) -> float:
        return float(self._get_grouped("model", "lambda2", 1e-3))

    @property
    def lambda3(self) -> float:
        return float(self._get_grouped("model", "lambda3", 10.0))

    @property
    def decay(self) -> float:
        return float(self._get_grouped("model", "decay", 0.85))

    @property
    def tol(self) -> float:
        return float(self._get_grouped("model", "tol", 1e-4))

    @property
    def max_iter(self) -> int:
        return int(self._get_grouped("model", "max_iter", 300))

    @property
    def max_outer_iter(self) -> int:
        return int(self._get_grouped("model", "max_outer_iter", 300))

    @property
    def line_search(self) -> bool:
        return bool(self._get_grouped("model", "line_search", True))

    @property
    def init_seasons(self) -> int:
        return int(self._get_grouped("model", "init_seasons", 3))

    def batch_config(self, seed: Optional[int] = None) -> BatchConfig:
        return self._validated(
            BatchConfig,
            dict(
                rank=self.rank,
                period=self.period,
                lambda1=self.lambda1,
                lambda2=self.lambda2,
                lambda3=self.lambda3,
                decay=self.decay,
                lambda3_floor_divisor=self._get_grouped("model", "lambda3_floor_divisor", 100.0),
                tol=self.tol,
                max_iter=self.max_iter,
                max_outer_iter=self.max_outer_iter,
                line_search=self.line_search,
                init_seasons=self.init_seasons,
                seed=self.seed if seed is None else seed,
            ),
        )

    # ========== online ==========

    @property
    def mu(self) -> float:
        return float(self._get_grouped("online", "mu", 0.1))

    @property
    def phi(self) -> float:
        return float(self._get_grouped("online", "phi", 0.01))

    @property
    def huber_k(self) -> float:
        return float(self._get_grouped("online", "huber_k", 2.0))

    @property
    def biweight_c(self) -> float:
        return float(self._get_grouped("online", "biweight_c", 2.52))

    @property
    def sigma_floor(self) -> float:
        return float(self._get_grouped("online", "sigma_floor", 1e-12))

    def online_config(self) -> OnlineConfig:
        robust = self._validated(RobustConfig, dict(huber_k=self.huber_k, biweight_c=self.biweight_c, phi=self.phi))
        return self._validated(
            OnlineConfig,
            dict(
                mu=self.mu,
                lambda1=self.lambda1,
                lambda2=self.lambda2,
                lambda3=self.lambda3,
                robust=robust,
                sigma_floor=self.sigma_floor,
                preclean=self.preclean,
            ),
        )

    # ========== corruption ==========

    def corruption_spec(self, seed: Optional[int] = None) -> CorruptionSpec:
        return self._validated(
            CorruptionSpec,
            dict(
                missing_pct=self._get_grouped("corruption", "missing_pct", 0.0),
                outlier_pct=self._get_grouped("corruption", "outlier_pct", 0.0),
                outlier_mag=self._get_grouped("corruption", "outlier_mag", 0.0),
                seed=self.seed if seed is None else seed,
            ),
        )

    # ========== ablation ==========

    @property
    def vanilla_init(self) -> bool:
        """初始化改用普通 ALS（λ1=λ2=0，无离群循环）。"""
        return bool(self._get_grouped("ablation", "vanilla_init", False))

    @property
    def preclean(self) -> bool:
        """关闭时在线阶段 O_t 恒为 0、Σ̂ 冻结。"""
        return bool(self._get_grouped("ablation", "preclean", True))

    # ========== forecast ==========

    @property
    def horizon(self) -> int:
        """留出末尾多少个切片做预测评估；0 表示不做预测。"""
        return int(self._get_grouped("forecast", "horizon", 0))

    # ========== run ==========

    @property
    def seed(self) -> int:
        return int(self._get_grouped("run", "seed", 0))

    @property
    def repeats(self) -> int:
        return max(1, int(self._get_grouped("run", "repeats", 1)))

    @property
    def save_checkpoint(self) -> bool:
        return bool(self._get_grouped("run", "checkpoint", False))

    # ========== output ==========

    @property
    def output_dir(self) -> str:
        return self._get_grouped("output", "dir", "") or os.path.join("runs", self.name)

    @property
    def omit_timing(self) -> bool:
        """为真时 steps.csv 的 step_ms 列留空，保证多次运行逐字节一致。"""
        return bool(self._get_grouped("output", "omit_timing", False))

    def _validated(self, model, data: dict):
        try:
            return model.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(f"[{self.name}] {model.__name__} 配置无效: {e}") from e


def parse_int_list(text: str) -> Tuple[int, ...]:
    """解析 "4,8,12" 形式的正整数列表（秩扫描、规模测试行数）。"""
    try:
        ranks = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        raise ConfigurationError(f"无法解析整数列表: {text!r}") from e
    if not ranks or any(r < 1 for r in ranks):
        raise ConfigurationError(f"列表元素必须是正整数: {text!r}")
    return ranks


def load_scenario(path: str) -> ConfigManager:
    """读取 JSON 场景文件（容忍 BOM），迁移扁平 key 后返回 ConfigManager。"""
    try:
        with open(path, encoding="utf-8-sig") as f:
            config = json.loads(f.read())
    except OSError as e:
        raise ConfigurationError(f"无法读取场景文件 {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"场景文件 {path} 不是合法 JSON: {e}") from e

    if not isinstance(config, dict):
        raise ConfigurationError(f"场景文件 {path} 顶层必须是对象")
    migrated = migrate_flat_config(config)
    if migrated:
        logger.info(f"Sofia: 场景文件 {path} 含 {migrated} 个扁平 key，已按分组读取")
    config.setdefault("name", os.path.splitext(os.path.basename(path))[0])
    return ConfigManager(config)
