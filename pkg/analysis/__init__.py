"""Analysis module."""

from .report import ANSWER_METRICS, ComparisonTable, compare_reports, build_report, report_json, report_text
from .charts import create_training_curves, create_metric_bars, log_frame, write_chart

__all__ = [
    "ANSWER_METRICS",
    "ComparisonTable",
    "compare_reports",
    "build_report",
    "report_json",
    "report_text",
    "create_training_curves",
    "create_metric_bars",
    "log_frame",
    "write_chart",
]
