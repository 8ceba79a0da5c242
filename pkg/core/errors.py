"""
SOFIA 引擎 - 异常定义

所有异常都继承 ValueError，调用方既可以按具体类型捕获，也可以统一捕获 ValueError。
"""

from __future__ import annotations

from typing import Optional


class SofiaError(ValueError):
    """引擎内所有可预期错误的基类。"""


class DimensionError(SofiaError):
    """形状、秩或列数不匹配，或模态下标越界。"""


class InsufficientHistoryError(SofiaError):
    """历史长度不足（初始化与 HW 拟合都要求至少 3 个季节）。"""


class InputError(SofiaError):
    """输入含非有限值或形状退化。"""


class ConfigurationError(SofiaError):
    """场景配置无效，或流中切片形状发生漂移。"""


class UndefinedMetricError(SofiaError):
    """指标无定义：空序列或真值范数为 0。"""


class CheckpointError(SofiaError):
    """检查点文件头（魔数 / 版本）不可识别。"""


class _LineError(SofiaError):
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"第 {line_number} 行: {message}"
        super().__init__(message)


class ParseError(_LineError):
    """三元组文件中的行无法解析（列数不对或非数值）。"""


class BoundsError(_LineError):
    """下标超出声明的张量形状。"""
