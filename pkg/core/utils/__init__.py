"""
Sofia - 核心工具模块
"""

from .time_utils import Stopwatch, elapsed_ms, format_duration

__all__ = [
    'Stopwatch',
    'elapsed_ms',
    'format_duration',
]
