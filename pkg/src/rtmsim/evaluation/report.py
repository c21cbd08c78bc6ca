"""Fixed-width classifier-by-group table and its CSV twin."""

from __future__ import annotations

import csv
import io
from decimal import ROUND_HALF_UP, Decimal

from ..cohort.splits import GROUPS
from ..learners import ALGORITHMS

DISPLAY_NAMES = {
    "knn": "K-nearest neighbors",
    "naive_bayes": "Naive Bayesian classifier",
    "decision_tree": "Decision tree",
    "random_forest": "Random forest",
    "logistic_regression": "Logistic regression",
    "gradient_boosting": "Gradient boosting",
    "svm": "Support vector machine",
}
CSV_HEADER = ("classifier", "group", "eff", "dis", "repeats")
FAILED = "--"


def format_value(v: float) -> str:
    """Two decimals, half away from zero, trailing zeros dropped ("0.6", "0").

    Rounding acts on the shortest decimal representation of the float, so a
    stored 0.615 renders as 0.62.
    """
    d = Decimal(repr(float(v))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    s = format(d, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def format_cell(result) -> str:
    if result is None:
        return ""
    if not result.ok:
        return FAILED
    return f"{format_value(result.eff)} / {format_value(result.dis)}"


def render_table(results) -> str:
    """Rows are classifiers in the canonical order, columns groups A-D.

    Only classifiers and groups present in ``results`` get rows/columns; an
    empty list gives the header alone (all four groups).
    """
    results = list(results)
    by_key = {(r.classifier, r.group): r for r in results}
    groups = [g for g in GROUPS if any(r.group == g for r in results)] or list(GROUPS)
    algs = [a for a in ALGORITHMS if any(r.classifier == a for r in results)]
    w0 = max(len("Classifier"), *(len(DISPLAY_NAMES[a]) for a in ALGORITHMS))
    cells = {k: format_cell(v) for k, v in by_key.items()}
    w = max([len("eff / dis"), len("Group A")] + [len(c) for c in cells.values()])
    lines = [
        "  ".join([f"{'Classifier':<{w0}}"] + [f"{'Group ' + g:<{w}}" for g in groups]).rstrip(),
        "  ".join([" " * w0] + [f"{'eff / dis':<{w}}" for _ in groups]).rstrip(),
    ]
    for a in algs:
        row = [f"{DISPLAY_NAMES[a]:<{w0}}"] + [f"{cells.get((a, g), ''):<{w}}" for g in groups]
        lines.append("  ".join(row).rstrip())
    return "\n".join(lines) + "\n"


def results_csv(results) -> str:
    """``classifier,group,eff,dis,repeats``; failed cells leave eff and dis empty."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        eff = "" if r.eff is None else repr(r.eff)
        dis = "" if r.dis is None else repr(r.dis)
        w.writerow([r.classifier, r.group, eff, dis, r.repeats])
    return buf.getvalue()
