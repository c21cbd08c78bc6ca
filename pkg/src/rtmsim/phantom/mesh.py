"""Tetrahedral meshing of the phantom domain.

The domain (hemisphere on a cylindrical slab) is filled with a body-centred
cubic (BCC) lattice of tetrahedra. Lattice vertices close to the boundary are
snapped onto it, remaining boundary-crossing tetrahedra are cut along the
surface and refilled with fixed stencils (isosurface stuffing). Tissue tags are
assigned per element from the phantom region containing its centroid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InvalidSpec, MeshFailure
from .tissues import TissueType

# Snap thresholds as fractions of edge length: axis-parallel and diagonal
# lattice edges respectively.
ALPHA_LONG = 0.24999
ALPHA_SHORT = 0.41189


class BoundaryKind(IntEnum):
    ROBIN = 0
    DIRICHLET = 1
    NEUMANN = 2  # only produced by benchmark box meshes


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray          # (N, 3) float64, metres
    tets: np.ndarray           # (E, 4) int64, positive orientation
    tissue: np.ndarray         # (E,) int8 TissueType codes
    faces: np.ndarray          # (F, 3) int64 boundary triangles, outward normals
    face_kind: np.ndarray      # (F,) int8 BoundaryKind
    vessel_nodes: np.ndarray = field(default=None)  # (N,) bool, imposed blood temperature

    def __post_init__(self):
        if self.vessel_nodes is None:
            object.__setattr__(self, "vessel_nodes", np.zeros(len(self.nodes), dtype=bool))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.tets)

    def volumes(self) -> np.ndarray:
        return signed_volumes(self.nodes, self.tets)

    def centroids(self) -> np.ndarray:
        return self.nodes[self.tets].mean(axis=1)

    def face_areas(self, faces=None) -> np.ndarray:
        f = self.faces if faces is None else faces
        p = self.nodes[f]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def boundary_nodes(self, kind: BoundaryKind) -> np.ndarray:
        return np.unique(self.faces[self.face_kind == kind])

    def with_tags(self, tissue, vessel_nodes=None) -> "Mesh":
        return Mesh(self.nodes, self.tets, np.asarray(tissue, dtype=np.int8), self.faces,
                    self.face_kind, vessel_nodes)

    def nodal_average(self, element_values) -> np.ndarray:
        """Volume-weighted average of element values over the elements touching each node."""
        vol = self.volumes()
        num = np.zeros(self.n_nodes)
        den = np.zeros(self.n_nodes)
        w = np.repeat(vol, 4)
        np.add.at(num, self.tets.ravel(), w * np.repeat(np.asarray(element_values, float), 4))
        np.add.at(den, self.tets.ravel(), w)
        return num / den

    def to_bytes(self) -> bytes:
        parts = [self.nodes, self.tets, self.tissue, self.faces, self.face_kind, self.vessel_nodes]
        return b"".join(np.ascontiguousarray(p).tobytes() for p in parts)


# --- geometry helpers -------------------------------------------------------

def signed_volumes(nodes, tets) -> np.ndarray:
    p = nodes[tets]
    a, b, c = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]
    return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0


def dihedral_angles(nodes, tets) -> np.ndarray:
    """All six dihedral angles per tetrahedron, in degrees, shape (E, 6)."""
    p = nodes[tets]
    # outward-ish face normals, face i opposite vertex i
    faces = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))
    normals = []
    for i, j, k in faces:
        n = np.cross(p[:, j] - p[:, i], p[:, k] - p[:, i])
        normals.append(n / np.linalg.norm(n, axis=1, keepdims=True))
    out = []
    for a in range(4):
        for b in range(a + 1, 4):
            cosang = -np.einsum("ij,ij->i", normals[a], normals[b])
            out.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return np.column_stack(out)


def _orient(nodes, tets):
    vol = signed_volumes(nodes, tets)
    neg = vol < 0
    tets = tets.copy()
    tets[neg, 2], tets[neg, 3] = tets[neg, 3].copy(), tets[neg, 2].copy()
    return tets


def boundary_faces(tets) -> tuple[np.ndarray, np.ndarray]:
    """Faces used by exactly one tetrahedron, oriented outward.

    Returns ``(faces, counts_ok)`` where ``counts_ok`` is False if any face is
    shared by more than two tetrahedra (non-manifold mesh).
    """
    local = np.array([(1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1)])  # outward for positive tets
    all_faces = tets[:, local].reshape(-1, 3)
    key = np.sort(all_faces, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    once = counts[inverse] == 1
    return all_faces[once], bool(counts.max(initial=0) <= 2)


# --- domain description -----------------------------------------------------

@dataclass(frozen=True)
class DomainShape:
    """Hemisphere of radius R on a cylinder slab of the given thickness."""
    radius: float
    base_thickness: float

    def phi(self, p):
        """Negative inside, positive outside, zero on the surface."""
        p = np.asarray(p, dtype=float)
        z = p[..., 2]
        r = np.hypot(p[..., 0], p[..., 1])
        dome = np.sqrt(r * r + z * z) - self.radius
        slab = np.maximum(r - self.radius, -self.base_thickness - z)
        return np.where(z >= 0, dome, slab)

    def volume(self) -> float:
        R, H = self.radius, self.base_thickness
        return 2.0 / 3.0 * np.pi * R ** 3 + np.pi * R * R * H


# --- BCC lattice ------------------------------------------------------------

def _bcc_lattice(shape: DomainShape, h: float):
    R, H = shape.radius, shape.base_thickness
    m = int(np.ceil(R / h)) + 1
    xs = (np.arange(2 * m + 1) - m) * h  # symmetric about the z axis
    nz = int(np.ceil((R + H) / h)) + 3
    zs = -H + (np.arange(nz + 1) - 1) * h  # one lattice plane on the base
    nx = ny = len(xs) - 1
    X, Y, Z = np.meshgrid(xs, xs, zs, indexing="ij")
    corners = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    cx = xs[:-1] + 0.5 * h
    cz = zs[:-1] + 0.5 * h
    X, Y, Z = np.meshgrid(cx, cx, cz, indexing="ij")
    centers = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    n_corner = len(corners)
    cdims = (nx + 1, ny + 1, nz + 1)
    zdims = (nx, ny, nz)

    def cid(i, j, k):
        return (i * cdims[1] + j) * cdims[2] + k

    def zid(i, j, k):
        return n_corner + (i * zdims[1] + j) * zdims[2] + k

    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    tets = []
    for axis in range(3):
        idx = [I, J, K]
        ok = idx[axis] < zdims[axis] - 1
        i, j, k = I[ok], J[ok], K[ok]
        c1 = zid(i, j, k)
        step = [0, 0, 0]
        step[axis] = 1
        c2 = zid(i + step[0], j + step[1], k + step[2])
        # corners of the shared face, cyclic order
        b, c = [a for a in range(3) if a != axis]
        base = [i, j, k]
        base[axis] = base[axis] + 1
        quad = []
        for db, dc in ((0, 0), (1, 0), (1, 1), (0, 1)):
            v = list(base)
            v[b] = v[b] + db
            v[c] = v[c] + dc
            quad.append(cid(*v))
        for q in range(4):
            tets.append(np.column_stack([c1, c2, quad[q], quad[(q + 1) % 4]]))
    tets = np.vstack(tets)
    verts = np.vstack([corners, centers])
    return verts, tets, n_corner


def _edge_table(tets):
    pairs = tets[:, [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]].reshape(-1, 2)
    pairs = np.sort(pairs, axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    return edges, inverse.reshape(-1, 6)


def _locate_zero(shape, a, b, iters=60):
    """Bisection for the sign change of ``phi`` on segments a->b; returns t in [0, 1]."""
    lo = np.zeros(len(a))
    hi = np.ones(len(a))
    fa = np.sign(shape.phi(a))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = np.sign(shape.phi(a + mid[:, None] * (b - a)))
        same = fm == fa
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _split_prisms(p):
    """Split prisms (rows: bottom v0 v1 v2, top v3 v4 v5, v_i above v_{i-3})
    into three tetrahedra each, choosing quad diagonals through the smallest
    global vertex index so that shared quads split identically."""
    perm = np.array([
        [0, 1, 2, 3, 4, 5], [1, 2, 0, 4, 5, 3], [2, 0, 1, 5, 3, 4],
        [3, 5, 4, 0, 2, 1], [4, 3, 5, 1, 0, 2], [5, 4, 3, 2, 1, 0],
    ])
    first = np.argmin(p, axis=1)
    q = np.take_along_axis(p, perm[first], axis=1)
    v0, v1, v2, v3, v4, v5 = q.T
    a = np.minimum(v1, v5) < np.minimum(v2, v4)
    t1 = np.where(a[:, None], np.column_stack([v0, v1, v2, v5]), np.column_stack([v0, v1, v2, v4]))
    t2 = np.where(a[:, None], np.column_stack([v0, v1, v5, v4]), np.column_stack([v0, v4, v2, v5]))
    t3 = np.column_stack([v0, v4, v5, v3])
    return np.vstack([t1, t2, t3])


def _split_pyramids(base, apex):
    """Pyramids with cyclic quad base (b0 b1 b2 b3): two tetrahedra each."""
    first = np.argmin(base, axis=1)
    even = (first % 2) == 0
    b0, b1, b2, b3 = base.T
    t1 = np.where(even[:, None], np.column_stack([b0, b1, b2, apex]), np.column_stack([b1, b2, b3, apex]))
    t2 = np.where(even[:, None], np.column_stack([b0, b2, b3, apex]), np.column_stack([b1, b3, b0, apex]))
    return np.vstack([t1, t2])


def _stuff(shape: DomainShape, h: float):
    verts, tets, n_corner = _bcc_lattice(shape, h)
    phi = shape.phi(verts)
    sign = np.sign(phi).astype(np.int8)
    keep = (sign[tets] <= 0).any(axis=1)
    tets = tets[keep]
    used = np.unique(tets)
    remap = np.full(len(verts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    verts, sign, tets = verts[used], sign[used], remap[tets]
    is_center = used >= n_corner
    orig_centroids = verts[tets].mean(axis=1)

    edges, tet_edges = _edge_table(tets)
    long_edge = is_center[edges[:, 0]] == is_center[edges[:, 1]]
    alpha = np.where(long_edge, ALPHA_LONG, ALPHA_SHORT)

    cut = sign[edges[:, 0]] * sign[edges[:, 1]] < 0
    cut_ids = np.nonzero(cut)[0]
    a, b = verts[edges[cut_ids, 0]], verts[edges[cut_ids, 1]]
    t = _locate_zero(shape, a, b)
    cut_t = np.full(len(edges), np.nan)
    cut_t[cut_ids] = t

    # candidate violations: (vertex, edge, distance fraction)
    near0 = cut_ids[t < alpha[cut_ids]]
    near1 = cut_ids[(1.0 - t) < alpha[cut_ids]]
    viol_v = np.concatenate([edges[near0, 0], edges[near1, 1]])
    viol_e = np.concatenate([near0, near1])
    viol_d = np.concatenate([cut_t[near0], 1.0 - cut_t[near1]])
    order = np.lexsort((viol_e, viol_d, viol_v))
    viol_v, viol_e = viol_v[order], viol_e[order]

    pos = verts.copy()
    sign = sign.copy()
    uniq = np.unique(viol_v)
    start = np.searchsorted(viol_v, uniq)
    bounds = list(start) + [len(viol_v)]
    for n, v in enumerate(uniq):
        if sign[v] == 0:
            continue
        for e in viol_e[bounds[n]:bounds[n + 1]]:
            u0, u1 = edges[e]
            if sign[u0] * sign[u1] < 0:  # cut point still present
                pa, pb = verts[u0], verts[u1]
                pos[v] = pa + cut_t[e] * (pb - pa)
                sign[v] = 0
                break

    # surviving cut points become new vertices
    alive = sign[edges[:, 0]] * sign[edges[:, 1]] < 0
    alive_ids = np.nonzero(alive)[0]
    ea, eb = edges[alive_ids, 0], edges[alive_ids, 1]
    cut_pos = verts[ea] + cut_t[alive_ids, None] * (verts[eb] - verts[ea])
    cut_vertex = np.full(len(edges), -1, dtype=np.int64)
    cut_vertex[alive_ids] = len(pos) + np.arange(len(alive_ids))
    pos = np.vstack([pos, cut_pos])

    s = sign[tets]
    n_neg = (s < 0).sum(axis=1)
    n_zero = (s == 0).sum(axis=1)
    n_pos = (s > 0).sum(axis=1)
    out = []

    whole = (n_neg >= 1) & (n_pos == 0)
    all_zero = (n_zero == 4) & (shape.phi(orig_centroids) < 0)
    out.append(tets[whole | all_zero])

    # order local vertices by sign: negatives first, then zeros, then positives
    local_order = np.argsort(s, axis=1, kind="stable")

    def gather(mask):
        rows = np.nonzero(mask)[0]
        lo = local_order[rows]
        return rows, lo, np.take_along_axis(tets[rows], lo, axis=1)

    # (1 neg, 0 zero, 3 pos): one tet
    rows, lo, g = gather((n_neg == 1) & (n_pos == 3))
    if len(rows):
        c = [cut_vertex[tet_edges[rows, _edge_slot(lo[:, 0], lo[:, k])]] for k in (1, 2, 3)]
        out.append(np.column_stack([g[:, 0], *c]))
    # (1, 1, 2)
    rows, lo, g = gather((n_neg == 1) & (n_zero == 1) & (n_pos == 2))
    if len(rows):
        c = [cut_vertex[tet_edges[rows, _edge_slot(lo[:, 0], lo[:, k])]] for k in (2, 3)]
        out.append(np.column_stack([g[:, 0], g[:, 1], *c]))
    # (1, 2, 1)
    rows, lo, g = gather((n_neg == 1) & (n_zero == 2) & (n_pos == 1))
    if len(rows):
        c = cut_vertex[tet_edges[rows, _edge_slot(lo[:, 0], lo[:, 3])]]
        out.append(np.column_stack([g[:, 0], g[:, 1], g[:, 2], c]))
    # (2, 1, 1): pyramid with base on face (a, b, p), apex the zero vertex
    rows, lo, g = gather((n_neg == 2) & (n_zero == 1) & (n_pos == 1))
    if len(rows):
        cap = cut_vertex[tet_edges[rows, _edge_slot(lo[:, 0], lo[:, 3])]]
        cbp = cut_vertex[tet_edges[rows, _edge_slot(lo[:, 1], lo[:, 3])]]
        out.append(_split_pyramids(np.column_stack([g[:, 0], g[:, 1], cbp, cap]), g[:, 2]))
    # (3, 0, 1): prism (a, b, c) / (cap, cbp, ccp)
    rows, lo, g = gather((n_neg == 3) & (n_pos == 1))
    if len(rows):
        c = [cut_vertex[tet_edges[rows, _edge_slot(lo[:, k], lo[:, 3])]] for k in (0, 1, 2)]
        out.append(_split_prisms(np.column_stack([g[:, 0], g[:, 1], g[:, 2], *c])))
    # (2, 0, 2): prism (a, cac, cad) / (b, cbc, cbd)
    rows, lo, g = gather((n_neg == 2) & (n_pos == 2))
    if len(rows):
        cac = cut_vertex[tet_edges[rows, _edge_slot(lo[:, 0], lo[:, 2])]]
        cad = cut_vertex[tet_edges[rows, _edge_slot(lo[:, 0], lo[:, 3])]]
        cbc = cut_vertex[tet_edges[rows, _edge_slot(lo[:, 1], lo[:, 2])]]
        cbd = cut_vertex[tet_edges[rows, _edge_slot(lo[:, 1], lo[:, 3])]]
        out.append(_split_prisms(np.column_stack([g[:, 0], cac, cad, g[:, 1], cbc, cbd])))

    new = np.vstack(out)
    if (new < 0).any():
        raise MeshFailure("stencil referenced a missing cut point")
    used = np.unique(new)
    remap = np.full(len(pos), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return pos[used], remap[new]


_SLOT = np.full((4, 4), -1, dtype=np.int64)
for (_i, _j), _s in {(0, 1): 0, (0, 2): 1, (0, 3): 2, (1, 2): 3, (1, 3): 4, (2, 3): 5}.items():
    _SLOT[_i, _j] = _SLOT[_j, _i] = _s


def _edge_slot(i, j):
    return _SLOT[i, j]


@lru_cache(maxsize=4)
def _domain_mesh_cached(radius: float, base_thickness: float, target_edge: float):
    shape = DomainShape(radius, base_thickness)
    nodes, tets = _stuff(shape, target_edge)
    tets = _orient(nodes, tets)
    vol = signed_volumes(nodes, tets)
    if (vol <= 1e-12 * target_edge ** 3).any():
        raise MeshFailure(f"{int((vol <= 0).sum())} elements with non-positive volume")
    faces, manifold = boundary_faces(tets)
    if not manifold:
        raise MeshFailure("a face is shared by more than two elements")
    centroid_z = nodes[faces].mean(axis=1)[:, 2]
    kind = np.where(centroid_z > 0, BoundaryKind.ROBIN, BoundaryKind.DIRICHLET).astype(np.int8)
    for arr in (nodes, tets, faces, kind):
        arr.setflags(write=False)
    return nodes, tets, faces, kind


def domain_mesh(radius: float, base_thickness: float, target_edge: float) -> Mesh:
    """Untagged mesh of the phantom domain (every element tagged adipose)."""
    if not 0 < target_edge < radius / 4:
        raise InvalidSpec(f"target_edge must lie in (0, R/4); got {target_edge}")
    nodes, tets, faces, kind = _domain_mesh_cached(float(radius), float(base_thickness), float(target_edge))
    tissue = np.full(len(tets), int(TissueType.AdiposeTissue), dtype=np.int8)
    return Mesh(nodes, tets, tissue, faces, kind)


def tetrahedralize(phantom, target_edge: float) -> Mesh:
    """Mesh ``phantom`` with lattice spacing ``target_edge`` and tag it.

    Element tags come from the region containing each centroid; nodes lying
    inside blood vessels are flagged for the imposed blood temperature.
    """
    base = domain_mesh(phantom.radius, phantom.base_thickness, target_edge)
    tissue = phantom.classify(base.centroids())
    if (tissue < 0).any():
        raise MeshFailure("element centroid outside the phantom domain")
    vessel = phantom.classify(base.nodes) == int(TissueType.BloodVessel)
    return base.with_tags(tissue, vessel)


def mesh_quality(mesh: Mesh) -> dict:
    vol = mesh.volumes()
    ang = dihedral_angles(mesh.nodes, mesh.tets)
    return {
        "nodes": mesh.n_nodes,
        "elements": mesh.n_elements,
        "boundary_faces": len(mesh.faces),
        "min_volume": float(vol.min()),
        "total_volume": float(vol.sum()),
        "min_dihedral_deg": float(ang.min()),
        "max_dihedral_deg": float(ang.max()),
    }


# --- structured box meshes (verification benchmarks) -----------------------

def box_mesh(lengths, counts, kinds=None, tissue=TissueType.MammaryGland) -> Mesh:
    """Kuhn (six-tetrahedra-per-cube) mesh of ``[0,Lx]x[0,Ly]x[0,Lz]``.

    ``kinds`` maps face names ``"x-", "x+", "y-", ... "z+"`` to a
    :class:`BoundaryKind`; unspecified faces are insulated (NEUMANN).
    """
    kinds = dict(kinds or {})
    (Lx, Ly, Lz), (nx, ny, nz) = lengths, counts
    xs, ys, zs = (np.linspace(0, L, n + 1) for L, n in ((Lx, nx), (Ly, ny), (Lz, nz)))
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    cube = [nid(I + (c >> 0 & 1), J + (c >> 1 & 1), K + (c >> 2 & 1)) for c in range(8)]
    # six tetrahedra sharing the main diagonal 0-7
    tets = np.vstack([np.column_stack([cube[0], cube[a], cube[a | b], cube[7]]) for a, b in
                      ((1, 2), (1, 4), (2, 1), (2, 4), (4, 1), (4, 2))])
    tets = _orient(nodes, tets)
    faces, _ = boundary_faces(tets)
    c = nodes[faces].mean(axis=1)
    tol = 1e-9 * max(Lx, Ly, Lz)
    kind = np.full(len(faces), BoundaryKind.NEUMANN, dtype=np.int8)
    for axis, name in enumerate("xyz"):
        L = (Lx, Ly, Lz)[axis]
        for side, where in (("-", np.abs(c[:, axis]) < tol), ("+", np.abs(c[:, axis] - L) < tol)):
            if name + side in kinds:
                kind[where] = kinds[name + side]
    return Mesh(nodes, tets, np.full(len(tets), int(tissue), dtype=np.int8), faces, kind)


# --- point location ---------------------------------------------------------

def barycentric(mesh: Mesh, elements, pts) -> np.ndarray:
    p = mesh.nodes[mesh.tets[elements]]
    T = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]], axis=2)
    lam = np.linalg.solve(T, (pts - p[:, 0])[..., None])[..., 0]
    return np.column_stack([1.0 - lam.sum(axis=1), lam])


def locate_points(mesh: Mesh, pts, candidates: int = 16):
    """Containing element and barycentric coordinates for each point.

    Points outside the mesh get element -1 (their barycentrics are those of
    the nearest candidate and should not be used).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    tree = cKDTree(mesh.centroids())
    k = min(candidates, mesh.n_elements)
    _, cand = tree.query(pts, k=k)
    cand = cand.reshape(len(pts), k)
    best_el = np.full(len(pts), -1, dtype=np.int64)
    best_bary = np.zeros((len(pts), 4))
    best_score = np.full(len(pts), -np.inf)
    for j in range(k):
        bary = barycentric(mesh, cand[:, j], pts)
        score = bary.min(axis=1)
        better = score > best_score
        best_score = np.where(better, score, best_score)
        best_el = np.where(better, cand[:, j], best_el)
        best_bary[better] = bary[better]
    best_el[best_score < -1e-9] = -1
    return best_el, best_bary


def interpolate(mesh: Mesh, values, pts, fill=np.nan) -> np.ndarray:
    el, bary = locate_points(mesh, pts)
    out = np.einsum("ij,ij->i", bary, np.asarray(values)[mesh.tets[np.maximum(el, 0)]])
    out[el < 0] = fill
    return out
