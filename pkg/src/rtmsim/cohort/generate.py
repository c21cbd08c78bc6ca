"""Synthetic patient cohorts.

Each patient gets its own phantom seed and tumor draw from a
``SeedSequence([seed, stream, k])`` so records do not depend on how many
workers run the simulations or in which order they finish.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..bioheat.solver import SolverConfig
from ..errors import ConfigError, RtmError, SimulationFailure
from ..phantom.geometry import PhantomSpec, build_phantom
from ..radiometry.measure import RadiometryConfig, ThermoRecord, measure_phantom
from .dataset import Dataset

MODEL_STREAM, SURROGATE_STREAM = 0, 1


@dataclass(frozen=True)
class CohortConfig:
    n_healthy: int = 159
    n_cancer: int = 160
    tumor_radius_m: tuple = (0.005, 0.015)
    tumor_depth_m: tuple = (0.02, 0.02)
    # surrogate "original" database
    original_n_healthy: int = 109
    original_n_cancer: int = 27
    original_variability: float = 0.2
    original_noise_k: float = 0.3
    mesh_edge_m: float | None = None   # overrides the solver's mesh edge for cohort runs
    seed: int = 0

    def validate(self) -> None:
        if min(self.n_healthy, self.n_cancer, self.original_n_healthy, self.original_n_cancer) < 0:
            raise ConfigError("cohort counts must be non-negative")
        for name in ("tumor_radius_m", "tumor_depth_m"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ConfigError(f"{name} must be an ordered positive range")
        if not 0 <= self.original_variability < 1:
            raise ConfigError("original_variability must lie in [0, 1)")
        if self.original_noise_k < 0:
            raise ConfigError("original_noise_k must be non-negative")
        if self.mesh_edge_m is not None and not self.mesh_edge_m > 0:
            raise ConfigError("mesh_edge_m must be positive")

    def replace(self, **kw) -> "CohortConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class PatientTask:
    index: int
    patient_id: str
    cancer: bool
    spec: PhantomSpec
    solver: SolverConfig
    radiometry: RadiometryConfig
    provenance: str
    noise_k: float
    noise_seed: tuple


def patient_spec(base: PhantomSpec, cfg: CohortConfig, seed: int, stream: int, k: int,
                 cancer: bool) -> PhantomSpec:
    """Per-patient phantom spec: fresh geometry/property seed and tumor draw."""
    ss = np.random.SeedSequence([seed, stream, k])
    patient_seed = int(ss.generate_state(1, dtype=np.uint64)[0])
    spec = dataclasses.replace(base, seed=patient_seed)
    if not cancer:
        return spec.with_tumor(present=False)
    rng = np.random.default_rng(np.random.SeedSequence([seed, stream, k, 1]))
    point = int(rng.integers(0, 9))
    radius = float(rng.uniform(*cfg.tumor_radius_m))
    depth = float(rng.uniform(*cfg.tumor_depth_m))
    return spec.with_tumor(present=True, point=point, radius_m=radius, depth_m=depth)


def run_patient(task: PatientTask) -> ThermoRecord:
    try:
        phantom = build_phantom(task.spec)
        rec = measure_phantom(phantom, task.solver, task.radiometry, task.patient_id, task.provenance)
    except RtmError as exc:
        raise SimulationFailure(task.patient_id, exc) from exc
    if task.noise_k > 0:
        rng = np.random.default_rng(np.random.SeedSequence(list(task.noise_seed)))
        noise = rng.normal(0.0, task.noise_k, size=len(rec.features))
        feats = np.asarray(rec.features) + noise
        rec = dataclasses.replace(rec, t_mw=tuple(feats[:9]), t_ir=tuple(feats[9:]))
        rec.validate()
    return rec


def _tasks(n_healthy, n_cancer, base, cfg, seed, stream, solver, rad, provenance, prefix, noise_k):
    if cfg.mesh_edge_m is not None:
        solver = solver.replace(mesh_edge_m=cfg.mesh_edge_m)
    tasks = []
    for k in range(n_healthy + n_cancer):
        cancer = k >= n_healthy
        spec = patient_spec(base, cfg, seed, stream, k, cancer)
        tasks.append(PatientTask(k, f"{prefix}{k:04d}", cancer, spec, solver, rad, provenance,
                                 noise_k, (seed, stream, k, 2)))
    return tasks


def _run(tasks, jobs: int, progress=None) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        out = []
        for t in tasks:
            out.append(run_patient(t))
            if progress:
                progress(len(out), len(tasks))
        return out
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        out = []
        for rec in pool.map(run_patient, tasks, chunksize=4):
            out.append(rec)
            if progress:
                progress(len(out), len(tasks))
        return out


def generate_cohort(n_healthy: int, n_cancer: int, base: PhantomSpec | None = None, seed: int = 0,
                    solver: SolverConfig | None = None, radiometry: RadiometryConfig | None = None,
                    cfg: CohortConfig | None = None, jobs: int = 1, progress=None) -> Dataset:
    """Model database: ``n_healthy`` tumor-free then ``n_cancer`` tumor-bearing records."""
    if n_healthy < 0 or n_cancer < 0:
        raise ConfigError("cohort counts must be non-negative")
    base = base or PhantomSpec()
    cfg = cfg or CohortConfig()
    cfg.validate()
    tasks = _tasks(n_healthy, n_cancer, base, cfg, seed, MODEL_STREAM, solver or SolverConfig(),
                   radiometry or RadiometryConfig(), "model", "M", 0.0)
    return Dataset(tuple(_run(tasks, jobs, progress)), "model")


def generate_original_surrogate(seed: int = 0, base: PhantomSpec | None = None,
                                solver: SolverConfig | None = None,
                                radiometry: RadiometryConfig | None = None,
                                cfg: CohortConfig | None = None, jobs: int = 1,
                                n_healthy: int | None = None, n_cancer: int | None = None,
                                progress=None) -> Dataset:
    """Stand-in for the clinical database.

    Uses its own seed stream, the shifted property spread
    ``cfg.original_variability`` and additive Gaussian noise of
    ``cfg.original_noise_k`` kelvin per feature.
    """
    base = base or PhantomSpec()
    cfg = cfg or CohortConfig()
    cfg.validate()
    nh = cfg.original_n_healthy if n_healthy is None else n_healthy
    nc = cfg.original_n_cancer if n_cancer is None else n_cancer
    shifted = dataclasses.replace(base, variability_default=cfg.original_variability)
    tasks = _tasks(nh, nc, shifted, cfg, seed, SURROGATE_STREAM, solver or SolverConfig(),
                   radiometry or RadiometryConfig(), "original-surrogate", "O", cfg.original_noise_k)
    return Dataset(tuple(_run(tasks, jobs, progress)), "original-surrogate")
