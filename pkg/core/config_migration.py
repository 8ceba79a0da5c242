"""
Sofia 配置迁移模块

把扁平 key（旧版场景文件、命令行参数）搬进嵌套分组结构。
新位置已有值时保留新值，扁平 key 一律删除。
"""

import logging

logger = logging.getLogger(__name__)

# 迁移映射：扁平 key -> (分组, 子 key)
_MIGRATION_MAP = {
    # model
    "rank": ("model", "rank"),
    "period": ("model", "period"),
    "lambda1": ("model", "lambda1"),
    "lambda2": ("model", "lambda2"),
    "lambda3": ("model", "lambda3"),
    "decay": ("model", "decay"),
    "tol": ("model", "tol"),
    "max_iter": ("model", "max_iter"),
    "max_outer_iter": ("model", "max_outer_iter"),
    "init_seasons": ("model", "init_seasons"),
    # online
    "mu": ("online", "mu"),
    "phi": ("online", "phi"),
    "huber_k": ("online", "huber_k"),
    "biweight_c": ("online", "biweight_c"),
    "sigma_floor": ("online", "sigma_floor"),
    # corruption
    "missing_pct": ("corruption", "missing_pct"),
    "outlier_pct": ("corruption", "outlier_pct"),
    "outlier_mag": ("corruption", "outlier_mag"),
    # source
    "source_path": ("source", "path"),
    "delimiter": ("source", "delimiter"),
    "log2": ("source", "log2"),
    # ablation
    "vanilla_init": ("ablation", "vanilla_init"),
    "preclean": ("ablation", "preclean"),
    # forecast
    "horizon": ("forecast", "horizon"),
    # run
    "seed": ("run", "seed"),
    "repeats": ("run", "repeats"),
    "checkpoint": ("run", "checkpoint"),
    # output
    "output_dir": ("output", "dir"),
    "omit_timing": ("output", "omit_timing"),
}


def migrate_flat_config(config: dict) -> int:
    """
    原地迁移扁平 key，返回迁移的项数。

    分组位置不是 dict 时跳过该 key（保留原样），不覆盖已有的新格式值。
    """
    migrated_count = 0
    for old_key, (group_name, sub_key) in _MIGRATION_MAP.items():
        if old_key not in config:
            continue

        old_value = config[old_key]

        if group_name not in config:
            config[group_name] = {}
        elif not isinstance(config[group_name], dict):
            continue

        if sub_key not in config[group_name]:
            config[group_name][sub_key] = old_value
            migrated_count += 1

        del config[old_key]

    if migrated_count > 0:
        logger.debug(f"Sofia: 配置迁移完成，{migrated_count} 项已迁移到分组结构")
    return migrated_count
