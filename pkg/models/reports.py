from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


class StepRecord(BaseModel):
    """
    单个时间步的记录，对应 steps.csv 的一行
    """
    t: int = Field(description="时间下标（0 起）")
    nre: Optional[float] = Field(default=None, description="该步 X̂_t 相对真值的归一化残差；无真值时为空")
    step_ms: Optional[float] = Field(default=None, description="step() 墙钟耗时（毫秒）；初始化段与省略计时时为空")
    n_observed: int = Field(default=0, description="该步观测元素个数 |Ω_t|")
    n_outliers_flagged: int = Field(default=0, description="该步 |O_t| > 0 的元素个数")


class MetricsReport(BaseModel):
    """
    一次运行的评估汇总
    """
    nre: List[float] = Field(default=[], description="逐步 NRE 序列")
    rae: Optional[float] = Field(default=None, description="NRE 序列的均值")
    afe: Optional[float] = Field(default=None, description="预测区间内的平均预测误差")
    art: Optional[float] = Field(default=None, description="平均单步耗时（秒），不含初始化")
    timings: Dict[str, float] = Field(default={}, description="阶段耗时（秒）：init / hw_fit / stream / forecast")
    n_steps: int = Field(default=0, description="在线处理的步数")
    seed: Optional[int] = Field(default=None, description="本次运行的种子")
    outlier_recall: Optional[float] = Field(default=None, description="离群位置召回率（有注入离群时）")

    @model_validator(mode="after")
    def _rae_is_mean(self):
        if self.nre and self.rae is not None:
            mean = sum(self.nre) / len(self.nre)
            if abs(mean - self.rae) > 1e-9 * max(1.0, abs(mean)):
                raise ValueError("rae 必须等于 nre 序列均值")
        return self
