"""Brightness and skin temperatures, and the 18-feature measurement record."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ValidationError, ZeroWeight
from ..phantom.mesh import BoundaryKind, Mesh, tetrahedralize
from ..bioheat.solver import SolverConfig, TemperatureField, solve_steady
from .power import MaterialLookup, PowerDensityField, grid_from_phantom, power_density_analytic, power_density_maxwell

N_POINTS = 9
LABELS = ("healthy", "cancer")
PROVENANCES = ("model", "original-surrogate")
SANITY_BAND = (20.0, 45.0)


@dataclass(frozen=True)
class RadiometryConfig:
    frequency_hz: float | None = None   # None: the phantom's frequency
    backend: str = "analytic"           # or "maxwell"
    grid_spacing_m: float | None = None  # None: lambda/10 in the densest tissue
    cycles: int = 20
    ir_spot_radius_m: float = 0.005
    path_samples: int = 16

    def validate(self) -> None:
        if self.backend not in ("analytic", "maxwell"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.frequency_hz is not None and not self.frequency_hz > 0:
            raise ConfigError("frequency_hz must be positive")
        if self.ir_spot_radius_m < 0:
            raise ConfigError("ir_spot_radius_m must be non-negative")
        if self.cycles < 2 or self.path_samples < 1:
            raise ConfigError("cycles must be >= 2 and path_samples >= 1")

    def replace(self, **kw) -> "RadiometryConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class ThermoRecord:
    t_mw: tuple          # 9 brightness temperatures, deg C
    t_ir: tuple          # 9 skin temperatures, deg C
    label: str
    provenance: str = "model"
    patient_id: str = ""
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "t_mw", tuple(float(v) for v in self.t_mw))
        object.__setattr__(self, "t_ir", tuple(float(v) for v in self.t_ir))

    def validate(self) -> None:
        if len(self.t_mw) != N_POINTS or len(self.t_ir) != N_POINTS:
            raise ValidationError("a record needs 9 microwave and 9 infrared values")
        if self.label not in LABELS:
            raise ValidationError(f"label {self.label!r} not in {LABELS}")
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"provenance {self.provenance!r} not in {PROVENANCES}")
        vals = np.array(self.features)
        lo, hi = SANITY_BAND
        if not np.isfinite(vals).all() or (vals < lo).any() or (vals > hi).any():
            raise ValidationError(f"record {self.patient_id!r} has values outside [{lo}, {hi}] deg C")

    @property
    def features(self) -> tuple:
        return self.t_mw + self.t_ir

    @property
    def y(self) -> int:
        return LABELS.index(self.label)


def brightness_temperature(T, P_d: PowerDensityField) -> float:
    """P_d-weighted volume average of T.

    Element contributions use the centroid rule: element-mean T times the
    element integral of P_d. The weights are normalized to sum to one.
    """
    values = T.values if isinstance(T, TemperatureField) else np.asarray(T, dtype=float)
    mesh = P_d.mesh
    if len(values) != mesh.n_nodes:
        raise ValidationError("temperature and power density live on different meshes")
    w = P_d.element_weights()
    total = w.sum()
    if not total > 0:
        raise ZeroWeight("power density integrates to zero")
    T_el = values[mesh.tets].mean(axis=1)
    return float(np.dot(w / total, T_el))


def skin_temperature(T, mesh: Mesh, point, spot_radius: float = 0.005) -> float:
    """Area-weighted mean surface temperature within ``spot_radius`` of ``point``.

    Only air-exposed faces count. With no face centroid inside the spot the
    nearest surface node value is returned, which is also the limit as the
    radius shrinks to zero.
    """
    values = T.values if isinstance(T, TemperatureField) else np.asarray(T, dtype=float)
    point = np.asarray(point, dtype=float)
    faces = mesh.faces[mesh.face_kind == BoundaryKind.ROBIN]
    cent = mesh.nodes[faces].mean(axis=1)
    near = np.linalg.norm(cent - point, axis=1) <= spot_radius
    if near.any():
        area = mesh.face_areas(faces[near])
        return float(np.dot(area, values[faces[near]].mean(axis=1)) / area.sum())
    surf = np.unique(faces)
    k = surf[np.argmin(np.linalg.norm(mesh.nodes[surf] - point, axis=1))]
    return float(values[k])


def measure_phantom(phantom, solver_cfg: SolverConfig | None = None,
                    rad_cfg: RadiometryConfig | None = None, patient_id: str = "",
                    provenance: str = "model", mesh: Mesh | None = None,
                    return_fields: bool = False):
    """Steady temperature, then T_B and skin temperature at all nine points.

    With ``return_fields`` the temperature field and the nine power-density
    fields are returned alongside the record.
    """
    solver_cfg = solver_cfg or SolverConfig()
    rad_cfg = rad_cfg or RadiometryConfig()
    rad_cfg.validate()
    f = rad_cfg.frequency_hz or phantom.spec.frequency_hz
    if rad_cfg.frequency_hz is not None and not np.isclose(f, phantom.spec.frequency_hz):
        raise ConfigError("radiometry frequency differs from the frequency the tissue table was evaluated at")
    if mesh is None:
        mesh = tetrahedralize(phantom, solver_cfg.mesh_edge_m)
    T = solve_steady(mesh, phantom.properties, solver_cfg)
    grid = lookup = None
    if rad_cfg.backend == "analytic":
        lookup = MaterialLookup(mesh, phantom.properties)
    else:
        grid = grid_from_phantom(phantom, f, rad_cfg.grid_spacing_m)
    t_mw, t_ir, pds = [], [], []
    for i in range(N_POINTS):
        if rad_cfg.backend == "analytic":
            pd = power_density_analytic(mesh, phantom.properties, i, f, phantom.points,
                                        rad_cfg.path_samples, lookup)
        else:
            pd = power_density_maxwell(phantom, mesh, i, f, grid=grid, cycles=rad_cfg.cycles)
        pds.append(pd)
        t_mw.append(brightness_temperature(T, pd))
        t_ir.append(skin_temperature(T, mesh, phantom.points[i], rad_cfg.ir_spot_radius_m))
    label = "cancer" if phantom.spec.tumor.present else "healthy"
    rec = ThermoRecord(tuple(t_mw), tuple(t_ir), label, provenance, patient_id, phantom.spec.seed)
    rec.validate()
    if return_fields:
        return rec, T, pds
    return rec
