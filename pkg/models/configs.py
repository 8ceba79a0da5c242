from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class RobustConfig(BaseModel):
    """
    鲁棒预清洗参数（Huber Ψ 截断阈值、biweight ρ 常数、误差尺度平滑系数）
    """
    model_config = ConfigDict(frozen=True)

    huber_k: float = Field(default=2.0, gt=0, description="Huber Ψ 与 biweight ρ 的阈值 k")
    biweight_c: float = Field(default=2.52, gt=0, description="biweight ρ 的饱和值 c_k")
    phi: float = Field(default=0.01, ge=0, le=1, description="误差尺度 Σ̂ 的平滑系数 φ")


class BatchConfig(BaseModel):
    """
    初始化阶段（外层软阈值循环 + 平滑正则 ALS）的参数
    """
    model_config = ConfigDict(frozen=True)

    rank: int = Field(ge=1, description="CP 秩 R")
    period: int = Field(ge=2, description="季节周期 m")
    lambda1: float = Field(default=1e-3, ge=0, description="时间平滑权重 λ1")
    lambda2: float = Field(default=1e-3, ge=0, description="季节平滑权重 λ2")
    lambda3: float = Field(default=10.0, gt=0, description="离群稀疏阈值 λ3 的初值")
    decay: float = Field(default=0.85, gt=0, lt=1, description="每轮外层循环后 λ3 的衰减系数 d")
    lambda3_floor_divisor: float = Field(default=100.0, gt=0, description="λ3 下限 = λ3 初值 / 该除数")
    tol: float = Field(default=1e-4, gt=0, description="ALS 拟合度变化与外层相对变化的收敛容差")
    max_iter: int = Field(default=300, ge=1, description="单次 ALS 的最大扫掠次数")
    max_outer_iter: int = Field(default=300, ge=1, description="外层软阈值循环的最大轮数")
    line_search: bool = Field(default=True, description="ALS 扫掠之间的外推加速，目标不下降时放弃外推")
    init_seasons: int = Field(default=3, ge=3, description="初始化使用的季节数（t_i = init_seasons·m）")
    seed: int = Field(default=0, description="因子随机初始化种子")

    @property
    def startup_length(self) -> int:
        return self.init_seasons * self.period


class OnlineConfig(BaseModel):
    """
    动态更新阶段的参数；λ3 在线上只用于 Σ̂ 的初值 λ3/100
    """
    model_config = ConfigDict(frozen=True)

    mu: float = Field(default=0.1, gt=0, description="梯度步长 μ")
    lambda1: float = Field(default=1e-3, ge=0, description="时间平滑权重 λ1")
    lambda2: float = Field(default=1e-3, ge=0, description="季节平滑权重 λ2")
    lambda3: float = Field(default=10.0, gt=0, description="仅用于 Σ̂ 初值 λ3/100")
    robust: RobustConfig = Field(default_factory=RobustConfig)
    sigma_floor: float = Field(default=1e-12, gt=0, description="Σ̂ 的下限，防止除零")
    preclean: bool = Field(default=True, description="关闭时 O_t 恒为 0 且 Σ̂ 冻结（消融实验）")

    @property
    def sigma_init(self) -> float:
        return self.lambda3 / 100.0


class CorruptionSpec(BaseModel):
    """
    (X, Y, Z) 污染元组：X% 缺失，Y% 离群值，离群幅度 ±Z·max(𝒳)
    """
    model_config = ConfigDict(frozen=True)

    missing_pct: float = Field(default=0.0, ge=0, lt=100, description="缺失比例 X（百分数）")
    outlier_pct: float = Field(default=0.0, ge=0, le=100, description="离群比例 Y（百分数）")
    outlier_mag: float = Field(default=0.0, ge=0, description="离群幅度倍数 Z")
    seed: int = Field(default=0, description="抽样种子")

    @property
    def is_clean(self) -> bool:
        return self.missing_pct == 0 and self.outlier_pct == 0


class SynthConfig(BaseModel):
    """
    合成流：随机非时间因子 + 正弦时间列 a_r·sin(2π/m·i + b_r) + c_r
    """
    model_config = ConfigDict(frozen=True)

    shape: List[int] = Field(default_factory=lambda: [30, 30], description="非时间模态长度")
    length: int = Field(default=90, ge=1, description="时间步数 T")
    rank: int = Field(default=3, ge=1, description="生成秩")
    period: int = Field(default=30, ge=2, description="季节周期 m")
    amplitude_range: Tuple[float, float] = Field(default=(-2.0, 2.0), description="a_r 取值范围")
    phase_range: Tuple[float, float] = Field(default=(0.0, 6.283185307179586), description="b_r 取值范围")
    offset_range: Tuple[float, float] = Field(default=(-2.0, 2.0), description="c_r 取值范围")
    noise: float = Field(default=0.0, ge=0, description="可选的加性高斯观测噪声标准差")
    seed: int = Field(default=0, description="生成种子")

    @model_validator(mode="after")
    def _check_shape(self):
        if not self.shape or any(s < 1 for s in self.shape):
            raise ValueError(f"非法的切片形状: {self.shape}")
        for name in ("amplitude_range", "phase_range", "offset_range"):
            low, high = getattr(self, name)
            if low > high:
                raise ValueError(f"{name} 下界大于上界")
        return self
