"""Sofia 数值引擎：张量基础运算、鲁棒 Holt-Winters、初始化与动态更新。"""
