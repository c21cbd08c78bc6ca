"""Sensitivity/specificity metrics, repeated group evaluation and reports."""

from .metrics import Confusion, confusion, effectiveness
from .protocol import EvalResult, evaluate_all, evaluate_group, run_once
from .report import CSV_HEADER, DISPLAY_NAMES, format_cell, format_value, render_table, results_csv

__all__ = ["Confusion", "confusion", "effectiveness", "EvalResult", "evaluate_all", "evaluate_group",
           "run_once", "CSV_HEADER", "DISPLAY_NAMES", "format_cell", "format_value", "render_table",
           "results_csv"]
