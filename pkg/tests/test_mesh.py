import numpy as np
import pytest

from rtmsim.errors import InvalidSpec, IOFailure, ValidationError
from rtmsim.phantom import BoundaryKind, TissueType, box_mesh, export_vtk, mesh_quality, read_vtk, tetrahedralize
from rtmsim.phantom.mesh import DomainShape, boundary_faces, interpolate, locate_points


def _face_counts(tets):
    f = np.sort(np.vstack([tets[:, [1, 2, 3]], tets[:, [0, 2, 3]], tets[:, [0, 1, 3]], tets[:, [0, 1, 2]]]), axis=1)
    _, counts = np.unique(f, axis=0, return_counts=True)
    return counts


def test_mesh_validity(coarse_mesh):
    m = coarse_mesh
    assert (m.volumes() > 0).all()
    counts = _face_counts(m.tets)
    assert set(np.unique(counts)) <= {1, 2}
    assert (counts == 1).sum() == len(m.faces)
    q = mesh_quality(m)
    assert q["min_dihedral_deg"] > 10.0


def test_every_element_tagged(coarse_mesh):
    assert len(coarse_mesh.tissue) == coarse_mesh.n_elements
    assert np.isin(coarse_mesh.tissue, [int(t) for t in TissueType]).all()


def test_volume_matches_domain(reference_mesh, reference_phantom):
    exact = DomainShape(reference_phantom.radius, reference_phantom.base_thickness).volume()
    assert reference_mesh.volumes().sum() == pytest.approx(exact, rel=0.02)


def test_boundary_classification(reference_mesh, reference_phantom):
    # air-exposed dome faces are Robin; the muscle-backed slab (bottom and
    # side wall, i.e. the chest wall) is held at core temperature
    m = reference_mesh
    c = m.nodes[m.faces].mean(axis=1)
    dome = c[:, 2] > 0
    assert (m.face_kind[dome] == BoundaryKind.ROBIN).all()
    assert (m.face_kind[~dome] == BoundaryKind.DIRICHLET).all()
    bottom = np.abs(c[:, 2] + reference_phantom.base_thickness) < 1e-9
    assert bottom.any()
    robin_area = m.face_areas(m.faces[dome]).sum()
    assert robin_area == pytest.approx(2 * np.pi * reference_phantom.radius ** 2, rel=0.02)


def test_outward_face_orientation(coarse_mesh):
    m = coarse_mesh
    p = m.nodes[m.faces]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    c = p.mean(axis=1)
    # the domain is star-shaped about a point inside the slab-dome junction
    assert (np.einsum("ij,ij->i", n, c - np.array([0.0, 0.0, -0.005])) > 0).all()


def test_vessel_nodes_flagged(reference_mesh):
    assert reference_mesh.vessel_nodes.any()


def test_element_count_scaling(reference_phantom):
    coarse = tetrahedralize(reference_phantom, 0.02)
    fine = tetrahedralize(reference_phantom, 0.01)
    ratio = fine.n_elements / coarse.n_elements
    assert 6.0 <= ratio <= 10.0


def test_meshing_is_deterministic(reference_phantom):
    a = tetrahedralize(reference_phantom, 0.02)
    b = tetrahedralize(reference_phantom, 0.02)
    assert a.to_bytes() == b.to_bytes()


def test_target_edge_range_checked(reference_phantom):
    with pytest.raises(InvalidSpec):
        tetrahedralize(reference_phantom, reference_phantom.radius / 3)


def test_box_mesh_boundaries():
    m = box_mesh((1.0, 2.0, 3.0), (2, 3, 4), {"z-": BoundaryKind.DIRICHLET, "z+": BoundaryKind.ROBIN})
    assert m.volumes().sum() == pytest.approx(6.0)
    assert (m.volumes() > 0).all()
    assert len(boundary_faces(m.tets)[0]) == len(m.faces)
    areas = {k: m.face_areas(m.faces[m.face_kind == k]).sum() for k in BoundaryKind}
    assert areas[BoundaryKind.DIRICHLET] == pytest.approx(2.0)
    assert areas[BoundaryKind.ROBIN] == pytest.approx(2.0)
    assert areas[BoundaryKind.NEUMANN] == pytest.approx(2 * (1 * 3 + 2 * 3))


def test_interpolation_reproduces_linear_fields(coarse_mesh, rng):
    m = coarse_mesh
    f = 2.0 + m.nodes @ np.array([1.0, -3.0, 0.5])
    pts = m.centroids()[rng.choice(m.n_elements, 200, replace=False)]
    assert np.allclose(interpolate(m, f, pts), 2.0 + pts @ np.array([1.0, -3.0, 0.5]))
    el, _ = locate_points(m, [[0.0, 0.0, 1.0]])
    assert el[0] == -1


# --- VTK export ----------------------------------------------------------------

def test_vtk_constant_field_round_trip(coarse_mesh, tmp_path):
    path = tmp_path / "t.vtk"
    export_vtk(coarse_mesh, path, {"T": np.full(coarse_mesh.n_nodes, 37.0)})
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0\n")
    assert "ASCII" in text and "DATASET UNSTRUCTURED_GRID" in text
    data = read_vtk(path)
    assert (data["point_data"]["T"] == 37.0).all()
    assert np.array_equal(data["cell_data"]["tissue"], coarse_mesh.tissue.astype(int))
    assert np.array_equal(data["cells"], coarse_mesh.tets)
    assert np.array_equal(data["points"], coarse_mesh.nodes)


def test_vtk_geometry_only(coarse_mesh, tmp_path):
    path = tmp_path / "g.vtk"
    export_vtk(coarse_mesh, path)
    data = read_vtk(path)
    assert data["point_data"] == {}
    assert list(data["cell_data"]) == ["tissue"]


def test_vtk_field_length_checked(coarse_mesh, tmp_path):
    with pytest.raises(ValidationError):
        export_vtk(coarse_mesh, tmp_path / "x.vtk", {"T": np.zeros(3)})
    with pytest.raises(ValidationError):
        export_vtk(coarse_mesh, tmp_path / "x.vtk", {"bad name": np.zeros(coarse_mesh.n_nodes)})


def test_vtk_unwritable_path(coarse_mesh, tmp_path):
    with pytest.raises(IOFailure):
        export_vtk(coarse_mesh, tmp_path / "missing" / "dir" / "x.vtk")


def test_vtk_readable_by_meshio(coarse_mesh, tmp_path):
    meshio = pytest.importorskip("meshio")
    path = tmp_path / "m.vtk"
    T = np.linspace(20, 37, coarse_mesh.n_nodes)
    export_vtk(coarse_mesh, path, {"T": T}, {"q": np.arange(coarse_mesh.n_elements, dtype=float)})
    m = meshio.read(path)
    assert np.allclose(m.points, coarse_mesh.nodes)
    assert np.array_equal(m.cells_dict["tetra"], coarse_mesh.tets)
    assert np.allclose(np.asarray(m.point_data["T"]).ravel(), T)
    assert np.array_equal(np.asarray(m.cell_data["tissue"][0]).ravel(), coarse_mesh.tissue)
