"""Electromagnetic power density around an antenna point.

Two backends produce nodal P_d on the bioheat mesh:

* ``analytic``: ``P_d(r) = sigma(r) * exp(-2 |r - p| / delta)`` with the
  conductor skin depth ``delta = sqrt(2 / (omega mu0 mu sigma))`` of the
  medium averaged along the straight path from the antenna ``p`` to ``r``;
* ``maxwell``: FDTD amplitude from a point dipole on a structured grid,
  ``P_d = sigma |E|^2 / 2`` per cell, resampled to the nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ValidationError
from ..phantom.geometry import measurement_points
from ..phantom.mesh import Mesh
from ..phantom.tissues import TissueType
from .fdtd import MU0, EmGrid, Source, fdtd_solve, sample_cells, wavelength_in_medium


@dataclass(frozen=True, eq=False)
class PowerDensityField:
    values: np.ndarray          # W/m^3; nodal, or per element when location == "element"
    mesh: Mesh
    point: int = -1
    frequency: float = 0.0
    backend: str = "analytic"
    location: str = "node"

    def __post_init__(self):
        n = self.mesh.n_nodes if self.location == "node" else self.mesh.n_elements
        if self.location not in ("node", "element"):
            raise ValidationError(f"unknown location {self.location!r}")
        if len(self.values) != n:
            raise ValidationError(f"{len(self.values)} values for {n} {self.location}s")
        if (np.asarray(self.values) < 0).any():
            raise ValidationError("power density must be non-negative")

    def element_weights(self) -> np.ndarray:
        """Per-element integral of P_d by the centroid rule."""
        vol = self.mesh.volumes()
        v = np.asarray(self.values, dtype=float)
        if self.location == "element":
            return vol * v
        return vol * v[self.mesh.tets].mean(axis=1)


def element_material(mesh: Mesh, props) -> dict:
    """Per-element sigma, eps_r and mu_r from the tissue tags."""
    table = {k: np.zeros(len(TissueType)) for k in ("sigma", "eps_r", "mu_r")}
    for t, p in props.items():
        table["sigma"][int(t)] = p.sigma
        table["eps_r"][int(t)] = p.eps_r
        table["mu_r"][int(t)] = p.mu_r
    return {k: v[mesh.tissue] for k, v in table.items()}


def skin_depth(sigma, mu_r, frequency):
    """Conductor skin depth sqrt(2 / (omega mu0 mu_r sigma)); infinite for sigma = 0."""
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore"):
        return np.sqrt(2.0 / (2 * np.pi * frequency * MU0 * mu_r * sigma))


def _apex_points(mesh: Mesh) -> np.ndarray:
    return measurement_points(float(mesh.nodes[:, 2].max()))


class MaterialLookup:
    """Voxelized element materials for fast path sampling.

    Each voxel (spacing about half the mean element size) stores the
    material of the element whose centroid is nearest to the voxel centre.
    """

    def __init__(self, mesh: Mesh, props, spacing: float | None = None):
        self.mesh = mesh
        self.element = element_material(mesh, props)
        cent = mesh.centroids()
        if spacing is None:
            spacing = 0.5 * float(np.cbrt(6.0 * np.abs(mesh.volumes()).mean()))
        self.spacing = spacing
        self.lo = mesh.nodes.min(axis=0)
        self.shape = np.ceil((mesh.nodes.max(axis=0) - self.lo) / spacing).astype(int) + 1
        axes = [self.lo[a] + spacing * (np.arange(self.shape[a]) + 0.5) for a in range(3)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        _, el = cKDTree(cent).query(np.column_stack([X.ravel(), Y.ravel(), Z.ravel()]))
        self.voxel_element = el.reshape(tuple(self.shape))
        self.sigma_node = mesh.nodal_average(self.element["sigma"])

    def elements_at(self, pts) -> np.ndarray:
        idx = np.floor((pts - self.lo) / self.spacing).astype(int)
        idx = np.clip(idx, 0, self.shape - 1)
        return self.voxel_element[idx[..., 0], idx[..., 1], idx[..., 2]]


def power_density_analytic(mesh: Mesh, props, antenna_point: int, frequency: float,
                           points=None, path_samples: int = 16,
                           lookup: MaterialLookup | None = None) -> PowerDensityField:
    """Exponential-decay P_d for the antenna at ``points[antenna_point]``.

    ``points`` defaults to the standard layout for the mesh's dome radius.
    The path medium is sampled at ``path_samples`` midpoints of the segment
    from antenna to node, each taking the material of the nearest element
    (through a voxel lookup, which may be shared between antenna points).
    """
    pts = _apex_points(mesh) if points is None else np.asarray(points, dtype=float)
    if not 0 <= antenna_point < len(pts):
        raise ValidationError(f"antenna point {antenna_point} out of range")
    p = pts[antenna_point]
    if lookup is None:
        lookup = MaterialLookup(mesh, props)
    mat = lookup.element
    r = mesh.nodes
    s = (np.arange(path_samples) + 0.5) / path_samples
    samples = p[None, None, :] + s[None, :, None] * (r - p)[:, None, :]
    el = lookup.elements_at(samples)
    sigma = mat["sigma"][el].mean(axis=1)
    mu = mat["mu_r"][el].mean(axis=1)
    dist = np.linalg.norm(r - p, axis=1)
    values = lookup.sigma_node * np.exp(-2.0 * dist / skin_depth(sigma, mu, frequency))
    return PowerDensityField(values, mesh, antenna_point, frequency, "analytic")


def power_density_from_field(amplitude, sigma, grid: EmGrid, mesh: Mesh, point: int = -1,
                             frequency: float = 0.0) -> PowerDensityField:
    """``P_d = sigma |E|^2 / 2`` per cell, trilinearly resampled to mesh nodes."""
    amplitude = np.asarray(amplitude, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if amplitude.shape != sigma.shape or amplitude.shape != grid.shape:
        raise ValidationError("amplitude and sigma must live on the same grid")
    cell = 0.5 * sigma * amplitude ** 2
    values = np.maximum(sample_cells(grid, cell, mesh.nodes), 0.0)
    return PowerDensityField(values, mesh, point, frequency, "maxwell")


def grid_from_phantom(phantom, frequency: float, spacing: float | None = None,
                      padding_cells: int = 3, courant: float = 0.5) -> EmGrid:
    """Structured material grid covering the phantom plus an air margin.

    Without an explicit ``spacing`` the largest spacing passing the
    lambda/10 gate for the densest tissue is used.
    """
    props = phantom.properties
    if spacing is None:
        lam = min(wavelength_in_medium(p.eps_r, p.mu_r, frequency, p.sigma) for p in props.values())
        spacing = lam / 10.0
    R, H = phantom.radius, phantom.base_thickness
    lo = np.array([-R, -R, -H]) - padding_cells * spacing
    hi = np.array([R, R, R]) + padding_cells * spacing
    n = np.ceil((hi - lo) / spacing).astype(int) + 1
    axes = [lo[a] + spacing * np.arange(n[a]) for a in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    tags = phantom.classify(np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])).reshape(X.shape)
    sigma = np.zeros(X.shape)
    eps = np.ones(X.shape)
    mu = np.ones(X.shape)
    for t, p in props.items():
        m = tags == int(t)
        sigma[m], eps[m], mu[m] = p.sigma, p.eps_r, p.mu_r
    return EmGrid(spacing, sigma, eps, mu, origin=lo, courant=courant)


def dipole_source(grid: EmGrid, point, frequency: float, amplitude: float = 1.0) -> Source:
    """Point dipole at the cell nearest ``point``, oriented along the outward
    radial direction (the dome normal)."""
    point = np.asarray(point, dtype=float)
    idx = np.clip(np.rint((point - grid.origin) / grid.spacing).astype(int), 0, np.array(grid.shape) - 1)
    normal = point / np.linalg.norm(point)
    return Source(tuple(int(i) for i in idx), tuple(normal), frequency, amplitude)


def power_density_maxwell(phantom, mesh: Mesh, antenna_point: int, frequency: float,
                          grid: EmGrid | None = None, spacing: float | None = None,
                          cycles: int = 20) -> PowerDensityField:
    """FDTD power density for one antenna position."""
    if grid is None:
        grid = grid_from_phantom(phantom, frequency, spacing)
    grid.source = dipole_source(grid, phantom.points[antenna_point], frequency)
    res = fdtd_solve(grid, cycles)
    return power_density_from_field(res.amplitude, grid.sigma, grid, mesh, antenna_point, frequency)
