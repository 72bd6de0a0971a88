from .params import count_params, dense_param_count, memory_mb
from .report import COLUMNS, DetectionResult, ParamRow, Report, emit_report, report_rows
from .scores import FAKE, REAL, Scores, confusion, metrics

__all__ = [
    "COLUMNS",
    "DetectionResult",
    "FAKE",
    "ParamRow",
    "REAL",
    "Report",
    "Scores",
    "confusion",
    "count_params",
    "dense_param_count",
    "emit_report",
    "memory_mb",
    "metrics",
    "report_rows",
]
