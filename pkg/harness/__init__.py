"""
Sofia - 数据与实验外围：流容器、污染注入、合成数据、三元组读写、指标、产物与编排
"""

from .corruption import corrupt_slice, inject_corruption
from .ingest import TensorStreamSource, export_triples, ingest_triples
from .metrics import metric_afe, metric_art, metric_nre, metric_rae, outlier_recall
from .stream import TensorStream
from .synthetic import SyntheticStream, synth_stream

__all__ = [
    "TensorStream",
    "TensorStreamSource",
    "SyntheticStream",
    "synth_stream",
    "corrupt_slice",
    "inject_corruption",
    "ingest_triples",
    "export_triples",
    "metric_nre",
    "metric_rae",
    "metric_afe",
    "metric_art",
    "outlier_recall",
]
