"""Tissue inventory, property records and per-patient property sampling."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from importlib import resources

import numpy as np
import yaml

from ..errors import ConfigError, InvalidSpec


class TissueType(IntEnum):
    # Integer values are the "tissue" cell tags written to VTK files.
    Skin = 0
    AdiposeTissue = 1
    MammaryGland = 2
    BreastLobule = 3
    Duct = 4
    ConnectiveTissue = 5
    Muscle = 6
    BloodVessel = 7
    Tumor = 8
    Nipple = 9


@dataclass(frozen=True)
class TissueProperties:
    rho: float
    c_p: float
    k: float
    q_met: float
    q_can: float
    q_rad: float
    sigma: float
    eps_r: float
    mu_r: float

    def validate(self, tissue: TissueType | None = None) -> None:
        if not (self.rho > 0 and self.c_p > 0 and self.k > 0):
            raise InvalidSpec(f"{tissue}: rho, c_p and k must be positive")
        if self.sigma < 0 or self.eps_r < 1 or self.mu_r <= 0:
            raise InvalidSpec(f"{tissue}: need sigma >= 0, eps_r >= 1, mu_r > 0")
        if self.q_rad > 0 or self.q_met < 0 or self.q_can < 0:
            raise InvalidSpec(f"{tissue}: need q_rad <= 0, q_met >= 0, q_can >= 0")
        if tissue is not None and tissue != TissueType.Tumor and self.q_can != 0:
            raise InvalidSpec(f"{tissue}: q_can must be zero outside tumors")

    @property
    def source(self) -> float:
        """Net volumetric heat source (W/m^3)."""
        return self.q_met + self.q_can + self.q_rad


PropertyMap = dict[TissueType, TissueProperties]

# Parameters perturbed by the variability model; q_can and q_rad keep their
# sign constraints through the clamp in ``_clamp``.
VARIABLE_FIELDS = ("rho", "c_p", "k", "q_met", "q_can", "q_rad", "sigma", "eps_r")


@lru_cache(maxsize=8)
def load_tissue_table(path: str | None = None) -> dict:
    if path is None:
        text = resources.files("rtmsim.data").joinpath("tissues.yaml").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    table = yaml.safe_load(text)
    if table.get("schema_version") != 1:
        raise ConfigError(f"unsupported tissue table schema {table.get('schema_version')!r}")
    missing = [t.name for t in TissueType if t.name not in table["tissues"]]
    if missing:
        raise ConfigError(f"tissue table lacks entries for {missing}")
    return table


def blood_temperature(path: str | None = None) -> float:
    return float(load_tissue_table(path)["blood_temperature_c"])


def default_tissue_properties(tissue: TissueType, frequency: float,
                              table_path: str | None = None) -> TissueProperties:
    if frequency <= 0:
        raise InvalidSpec("frequency must be positive")
    table = load_tissue_table(table_path)
    row = table["tissues"][TissueType(tissue).name]
    f_ref = float(table["reference_frequency_hz"])
    sigma = row["sigma_s_m"] * (frequency / f_ref) ** row["sigma_exponent"]
    props = TissueProperties(
        rho=row["rho"], c_p=row["c_p"], k=row["k"], q_met=row["q_met"],
        q_can=row["q_can"], q_rad=row["q_rad"], sigma=float(sigma),
        eps_r=row["eps_r"], mu_r=row["mu_r"],
    )
    props.validate(tissue)
    return props


def default_property_map(frequency: float, table_path: str | None = None) -> PropertyMap:
    return {t: default_tissue_properties(t, frequency, table_path) for t in TissueType}


def _clamp(name: str, value: float, default: float) -> float:
    if name in ("rho", "c_p", "k"):
        return max(value, 1e-6 * default)
    if name == "eps_r":
        return max(value, 1.0)
    if name in ("sigma", "q_met", "q_can"):
        return max(value, 0.0)
    if name == "q_rad":
        return min(value, 0.0)
    return value


def sample_patient_properties(spec, rng: np.random.Generator | None = None) -> PropertyMap:
    """Draw one patient's property map: every parameter of every tissue is
    scaled by ``1 + u`` with ``u ~ U[-spread, spread]`` independently.

    ``spec`` is a :class:`~rtmsim.phantom.geometry.PhantomSpec`; the draw is a
    pure function of its seed unless an explicit generator is passed.
    """
    spec.validate()
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    base = default_property_map(spec.frequency_hz, spec.tissue_table)
    out: PropertyMap = {}
    for tissue in TissueType:
        props = base[tissue]
        changes = {}
        for name in VARIABLE_FIELDS:
            spread = spec.variability.get(name, spec.variability_default)
            u = rng.uniform(-spread, spread) if spread > 0 else 0.0
            default = getattr(props, name)
            changes[name] = _clamp(name, default * (1.0 + u), default)
        out[tissue] = dataclasses.replace(props, **changes)
    return out
