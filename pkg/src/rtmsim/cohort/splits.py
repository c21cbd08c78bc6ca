"""Train/test group splits A-D between the original and model databases.

A: train = stratified half of original; test = all model.
B: train = random 90% of model; test = all original.
C: train = stratified half of original; test = the rest of original.
D: train = stratified half of original plus all model; test = the rest of original.

Stratified halves take ``n // 2`` records from each class (healthy, cancer),
so odd class counts round the train side down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GroupUndefined, ValidationError
from .dataset import Dataset

GROUPS = ("A", "B", "C", "D")
MODEL_TRAIN_FRACTION = 0.9


@dataclass(frozen=True)
class GroupSplit:
    group: str
    train: Dataset
    test: Dataset
    seed: int

    def __post_init__(self):
        overlap = set(self.train.ids) & set(self.test.ids)
        if overlap:
            raise ValidationError(f"train and test share ids {sorted(overlap)[:3]}")


def _rng(seed: int, group: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, GROUPS.index(group)]))


def stratified_half(ds: Dataset, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask selecting ``n_c // 2`` random records of each class."""
    y = ds.y()
    mask = np.zeros(len(ds), dtype=bool)
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        mask[rng.permutation(idx)[: len(idx) // 2]] = True
    return mask


def make_split(original: Dataset, model: Dataset, group: str, seed: int = 0) -> GroupSplit:
    """Build group ``group`` deterministically from ``seed``."""
    if group not in GROUPS:
        raise GroupUndefined(f"group {group!r} is not one of {GROUPS}")
    if len(original) == 0 or len(model) == 0:
        raise ValidationError("both datasets must be non-empty")
    rng = _rng(seed, group)
    if group == "B":
        n = int(np.floor(MODEL_TRAIN_FRACTION * len(model)))
        pick = np.zeros(len(model), dtype=bool)
        pick[rng.permutation(len(model))[:n]] = True
        return GroupSplit(group, model.subset(np.flatnonzero(pick)), original, seed)
    half = stratified_half(original, rng)
    train = original.subset(np.flatnonzero(half))
    rest = original.subset(np.flatnonzero(~half))
    if group == "A":
        return GroupSplit(group, train, model, seed)
    if group == "C":
        return GroupSplit(group, train, rest, seed)
    return GroupSplit(group, train + model, rest, seed)
