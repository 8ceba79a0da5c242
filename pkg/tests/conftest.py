"""pytest 配置文件：把仓库根目录加入 sys.path，并提供小规模数值测试共用的夹具。"""

import sys
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 完整规模的合成流实验，耗时较长")
