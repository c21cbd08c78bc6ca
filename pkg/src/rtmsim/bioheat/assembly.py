"""P1 finite-element assembly of the bioheat system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import MissingProperties, SingularElement
from ..phantom.mesh import BoundaryKind, Mesh
from ..phantom.tissues import TissueType, blood_temperature


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    G: sp.csr_matrix        # consistent heat-capacity ("damping") matrix
    M: sp.csr_matrix        # conduction stiffness plus Robin surface term
    P: np.ndarray           # load: volumetric sources plus Robin ambient term
    G_diag: np.ndarray      # row-sum lumped G
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.P)

    @property
    def dirichlet(self) -> dict:
        return dict(zip(self.dirichlet_nodes.tolist(), self.dirichlet_values.tolist()))


def p1_gradients(nodes, tets):
    """Constant basis-function gradients (E, 4, 3) and volumes (E,)."""
    p = nodes[tets]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]], axis=1)  # rows = edges
    det = np.linalg.det(J)
    vol = det / 6.0
    if (np.abs(vol) <= 0).any():
        bad = int(np.nonzero(np.abs(vol) <= 0)[0][0])
        raise SingularElement(f"element {bad} has zero volume")
    invJ = np.linalg.inv(J)  # columns are gradients of barycentrics 1..3
    g123 = np.transpose(invJ, (0, 2, 1))
    g0 = -g123.sum(axis=1, keepdims=True)
    return np.concatenate([g0, g123], axis=1), np.abs(vol)


_MASS_PATTERN = (np.ones((4, 4)) + np.eye(4)) / 20.0   # times V
_FACE_PATTERN = (np.ones((3, 3)) + np.eye(3)) / 12.0   # times A


def _scatter(idx, local, n):
    k = idx.shape[1]
    rows = np.repeat(idx, k, axis=1).ravel()
    cols = np.tile(idx, (1, k)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


def mass_matrix(mesh: Mesh, coef=1.0) -> sp.csr_matrix:
    _, vol = p1_gradients(mesh.nodes, mesh.tets)
    coef = np.broadcast_to(np.asarray(coef, float), vol.shape)
    local = (coef * vol)[:, None, None] * _MASS_PATTERN
    return _scatter(mesh.tets, local, mesh.n_nodes)


def element_arrays(mesh: Mesh, props) -> dict:
    """Per-element rho*c_p, k and net source, looked up by tissue tag."""
    codes = np.unique(mesh.tissue)
    missing = [TissueType(c).name for c in codes if TissueType(c) not in props]
    if missing:
        raise MissingProperties(f"no properties for tissue(s) {missing}")
    lut = {name: np.zeros(len(TissueType)) for name in ("rhoc", "k", "q", "sigma")}
    for t, pr in props.items():
        lut["rhoc"][int(t)] = pr.rho * pr.c_p
        lut["k"][int(t)] = pr.k
        lut["q"][int(t)] = pr.source
        lut["sigma"][int(t)] = pr.sigma
    return {name: table[mesh.tissue] for name, table in lut.items()}


def assemble(mesh: Mesh, props, config) -> SystemMatrices:
    """Build G, M, P and the Dirichlet set for ``mesh``.

    ``config`` is a :class:`~rtmsim.bioheat.solver.SolverConfig`.
    """
    grads, vol = p1_gradients(mesh.nodes, mesh.tets)
    arr = element_arrays(mesh, props)
    q = arr["q"].copy()
    skin = mesh.tissue == int(TissueType.Skin)
    if config.q_rad is not None:
        q[skin] += config.q_rad - props[TissueType.Skin].q_rad
    vessel_el = mesh.tissue == int(TissueType.BloodVessel)
    if config.vessel_mode == "source":
        q[vessel_el] += config.vessel_source_w_m3

    n = mesh.n_nodes
    G = _scatter(mesh.tets, (arr["rhoc"] * vol)[:, None, None] * _MASS_PATTERN, n)
    K_local = (arr["k"] * vol)[:, None, None] * np.einsum("eik,ejk->eij", grads, grads)
    M = _scatter(mesh.tets, K_local, n)
    P = np.zeros(n)
    np.add.at(P, mesh.tets.ravel(), np.repeat(q * vol / 4.0, 4))

    robin = mesh.faces[mesh.face_kind == BoundaryKind.ROBIN]
    if len(robin) and config.h_air > 0:
        area = mesh.face_areas(robin)
        M = M + _scatter(robin, (config.h_air * area)[:, None, None] * _FACE_PATTERN, n)
        np.add.at(P, robin.ravel(), np.repeat(config.h_air * config.t_air_c * area / 3.0, 3))

    values = np.full(n, np.nan)
    base = mesh.boundary_nodes(BoundaryKind.DIRICHLET)
    values[base] = config.t_core_c
    if config.vessel_mode == "dirichlet":
        t_blood = config.t_blood_c if config.t_blood_c is not None else blood_temperature()
        values[mesh.vessel_nodes] = t_blood
    nodes = np.nonzero(~np.isnan(values))[0]
    M = M.tocsr()
    return SystemMatrices(G=G, M=M, P=P, G_diag=lump(G), dirichlet_nodes=nodes,
                          dirichlet_values=values[nodes])


def lump(G) -> np.ndarray:
    """Row-sum lumping of a mass-type matrix."""
    return np.asarray(G.sum(axis=1)).ravel()
