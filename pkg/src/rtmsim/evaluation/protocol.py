"""Repeated split/train/test runs per (classifier, group) cell."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..cohort.dataset import Dataset
from ..cohort.splits import GROUPS, make_split
from ..errors import ConfigError, RtmError
from ..learners import LearnerSpec, fit, predict
from .metrics import confusion, effectiveness


@dataclass(frozen=True)
class EvalResult:
    classifier: str
    group: str
    eff: float | None              # mean over repeats; None if the cell failed
    dis: float | None              # population variance of eff over repeats
    repeats: int
    runs: tuple = field(default=())  # per-repeat (Sens, Spec, eff)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_once(spec: LearnerSpec, original: Dataset, model: Dataset, group: str, split_seed: int) -> tuple:
    """One split, fit and test; returns ``(Sens, Spec, eff)``."""
    split = make_split(original, model, group, split_seed)
    m = fit(spec, split.train.X(), split.train.y())
    pred = predict(m, split.test.X())
    return effectiveness(confusion(pred, split.test.y()))


def summarize(spec: LearnerSpec, group: str, runs, error: str | None = None) -> EvalResult:
    if error is not None:
        return EvalResult(spec.algorithm, group, None, None, len(runs), tuple(runs), error)
    effs = np.array([r[2] for r in runs])
    return EvalResult(spec.algorithm, group, float(effs.mean()), float(effs.var()), len(runs),
                      tuple(tuple(float(v) for v in r) for r in runs))


def _split_seeds(base_seed: int, repeats: int, vary_split: bool) -> list:
    return [base_seed + r if vary_split else base_seed for r in range(1, repeats + 1)]


def evaluate_group(spec: LearnerSpec, original: Dataset, model: Dataset, group: str,
                   repeats: int = 10, base_seed: int = 0, vary_split: bool = True) -> EvalResult:
    """Mean eff and its population variance over ``repeats`` seeded splits.

    Repeat ``r`` (1-based) uses split seed ``base_seed + r``; the learner
    keeps ``spec.seed`` throughout. With ``vary_split=False`` every repeat
    reuses split seed ``base_seed``. Errors propagate.
    """
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    runs = [run_once(spec, original, model, group, s) for s in _split_seeds(base_seed, repeats, vary_split)]
    return summarize(spec, group, runs)


def _cell_task(args):
    spec, original, model, group, seed = args
    try:
        return run_once(spec, original, model, group, seed), None
    except RtmError as exc:
        return None, f"{exc.category}: {exc}"


def evaluate_all(specs, original: Dataset, model: Dataset, groups=GROUPS, repeats: int = 10,
                 base_seed: int = 0, jobs: int = 1, vary_split: bool = True) -> list:
    """Every (classifier, group) cell; a failing repeat marks its cell failed
    instead of aborting the others. Results come back in input order."""
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    seeds = _split_seeds(base_seed, repeats, vary_split)
    cells = [(spec, g) for spec in specs for g in groups]
    tasks = [(spec, original, model, g, s) for spec, g in cells for s in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_cell_task, tasks))
    else:
        outs = [_cell_task(t) for t in tasks]
    results = []
    for i, (spec, g) in enumerate(cells):
        chunk = outs[i * repeats:(i + 1) * repeats]
        errors = [e for _, e in chunk if e is not None]
        runs = [r for r, _ in chunk if r is not None]
        results.append(summarize(spec, g, runs, errors[0] if errors else None))
    return results
