"""
Sofia - 计时相关工具函数
"""

import logging
import time
from contextlib import contextmanager
from typing import Dict, Iterator

logger = logging.getLogger(__name__)


class Stopwatch:
    """
    按阶段累计墙钟耗时（单调时钟）。

    用法：
        watch = Stopwatch()
        with watch.phase("init"):
            ...
        watch.timings  # {"init": 1.23}
    """

    def __init__(self):
        self.timings: Dict[str, float] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.timings[name] = self.timings.get(name, 0.0) + elapsed
            logger.debug(f"Sofia: 阶段 {name} 用时 {format_duration(elapsed)}")


def elapsed_ms(start: float) -> float:
    """从 perf_counter 起点到现在的毫秒数。"""
    return (time.perf_counter() - start) * 1000.0


def format_duration(seconds: float) -> str:
    """
    将秒数格式化为便于阅读的字符串。

    Args:
        seconds (float): 耗时（秒）。

    Returns:
        str: 例如 "850µs"、"12.3ms"、"4.56s"、"2m03s"。负数或非数值返回空字符串。
    """
    try:
        seconds = float(seconds)
    except (ValueError, TypeError):
        return ""

    if seconds < 0 or seconds != seconds:
        return ""
    elif seconds < 1e-3:
        return f"{seconds * 1e6:.0f}µs"
    elif seconds < 1:
        return f"{seconds * 1e3:.1f}ms"
    elif seconds < 60:
        return f"{seconds:.2f}s"
    else:
        minutes = int(seconds // 60)
        return f"{minutes}m{int(seconds - minutes * 60):02d}s"
