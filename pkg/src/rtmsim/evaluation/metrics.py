"""Confusion counts, sensitivity, specificity and their geometric mean."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import LengthMismatch, UndefinedMetric, ValidationError


@dataclass(frozen=True)
class Confusion:
    TP: int
    FN: int
    TN: int
    FP: int

    def __post_init__(self):
        if min(self.TP, self.FN, self.TN, self.FP) < 0:
            raise ValidationError("confusion counts must be non-negative")

    @property
    def P(self) -> int:
        return self.TP + self.FN

    @property
    def N(self) -> int:
        return self.TN + self.FP

    @property
    def total(self) -> int:
        return self.P + self.N


def confusion(pred, truth) -> Confusion:
    """Counts with cancer (1) as the positive class."""
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions for {len(truth)} labels")
    if not (np.isin(pred, (0, 1)).all() and np.isin(truth, (0, 1)).all()):
        raise ValidationError("labels must be 0 (healthy) or 1 (cancer)")
    p, t = pred == 1, truth == 1
    return Confusion(TP=int(np.sum(p & t)), FN=int(np.sum(~p & t)),
                     TN=int(np.sum(~p & ~t)), FP=int(np.sum(p & ~t)))


def effectiveness(c: Confusion) -> tuple:
    """``(Sens, Spec, eff)`` with ``eff = sqrt(Sens * Spec)``.

    A test set without positives or without negatives leaves one of the
    rates undefined, which raises :class:`UndefinedMetric`.
    """
    if c.P == 0:
        raise UndefinedMetric("no cancer cases in the test set: sensitivity undefined")
    if c.N == 0:
        raise UndefinedMetric("no healthy cases in the test set: specificity undefined")
    sens = c.TP / c.P
    spec = c.TN / c.N
    return sens, spec, math.sqrt(sens * spec)
