import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp

from _bench import (H_AIR, SLAB_L, T_AIR, l2_error, slab_config, slab_exact, slab_mesh,
                    slab_solution, surface_temperature_no_source)
from conftest import STEADY, slab_props
from rtmsim.bioheat import (SolverConfig, TemperatureField, assemble, direct_steady, lump, march,
                            step, temperature_csv)
from rtmsim.bioheat.assembly import mass_matrix, p1_gradients
from rtmsim.bioheat.solver import linear_solve
from rtmsim.errors import ConfigError, MissingProperties, SingularElement, SolverDiverged
from rtmsim.phantom import BoundaryKind, Mesh, TissueType, box_mesh
from rtmsim.phantom.mesh import boundary_faces

UNIT_TET = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def single_tet(kinds=None):
    """Unit tetrahedron; ``kinds`` maps local face index to a boundary kind."""
    tets = np.array([[0, 1, 2, 3]])
    faces, _ = boundary_faces(tets)
    kind = np.full(len(faces), BoundaryKind.NEUMANN, dtype=np.int8)
    for i, f in enumerate(faces):
        for key, k in (kinds or {}).items():
            if set(f.tolist()) == set(key):
                kind[i] = k
    return Mesh(UNIT_TET.copy(), tets, np.array([int(TissueType.MammaryGland)], dtype=np.int8),
                faces, kind)


# --- element matrices ------------------------------------------------------------

def test_single_tet_mass_matrix():
    G = mass_matrix(single_tet()).toarray()
    V = 1.0 / 6.0
    expected = V / 20.0 * (np.ones((4, 4)) + np.eye(4))
    assert np.allclose(G, expected, rtol=0, atol=1e-15)
    g = lump(sp.csr_matrix(G))
    assert np.allclose(g, V / 4.0)
    assert g.sum() == pytest.approx(np.trace(G) + (G.sum() - np.trace(G)))


def test_lumping_preserves_total_and_diagonal_input():
    G = mass_matrix(slab_mesh(4))
    assert lump(G).sum() == pytest.approx(G.sum())
    D = sp.diags([1.0, 2.0, 3.0]).tocsr()
    assert np.array_equal(lump(D), [1.0, 2.0, 3.0])


def test_gradients_sum_to_zero_and_reproduce_linears():
    grads, vol = p1_gradients(UNIT_TET, np.array([[0, 1, 2, 3]]))
    assert vol[0] == pytest.approx(1 / 6)
    assert np.allclose(grads[0].sum(axis=0), 0)
    f = UNIT_TET @ np.array([2.0, -1.0, 3.0])
    assert np.allclose(grads[0].T @ f, [2.0, -1.0, 3.0])


def test_degenerate_element_raises():
    flat = UNIT_TET.copy()
    flat[3] = [1.0, 1.0, 0.0]
    with pytest.raises(SingularElement):
        p1_gradients(flat, np.array([[0, 1, 2, 3]]))


def test_missing_tissue_properties_raise():
    props = slab_props()
    del props[TissueType.MammaryGland]
    with pytest.raises(MissingProperties):
        assemble(single_tet(), props, SolverConfig())


def test_stiffness_symmetric_with_zero_row_sums_without_robin():
    sys = assemble(slab_mesh(4), slab_props(), slab_config(h_air=0.0))
    M = sys.M
    assert abs(M - M.T).max() < 1e-12 * abs(M).max()
    assert np.allclose(M @ np.ones(sys.n), 0, atol=1e-12 * abs(M).max())
    assert abs(sys.G - sys.G.T).max() == 0


def test_robin_term_row_sums():
    kinds = {k: BoundaryKind.ROBIN for k in ("x-", "x+", "y-", "y+", "z-", "z+")}
    mesh = box_mesh((1.0, 1.0, 1.0), (3, 3, 3), kinds)
    sys = assemble(mesh, slab_props(), SolverConfig(h_air=H_AIR))
    row = sys.M @ np.ones(sys.n)
    share = np.zeros(sys.n)
    np.add.at(share, mesh.faces.ravel(), np.repeat(mesh.face_areas() / 3.0, 3))
    assert np.allclose(row, H_AIR * share, atol=1e-12)
    interior = share == 0
    assert interior.any() and np.allclose(row[interior], 0, atol=1e-12)
    assert row.sum() == pytest.approx(H_AIR * 6.0)


def test_load_vector_integrates_source():
    mesh = slab_mesh(4)
    sys = assemble(mesh, slab_props(q=1000.0), slab_config(h_air=0.0))
    assert sys.P.sum() == pytest.approx(1000.0 * mesh.volumes().sum())


# --- time stepping ---------------------------------------------------------------

def test_step_single_free_node_closed_form():
    # face (0,1,2) fixed at core temperature, node 3 free and insulated
    mesh = single_tet({(0, 1, 2): BoundaryKind.DIRICHLET})
    sys = assemble(mesh, slab_props(q=5000.0), SolverConfig())
    assert sys.dirichlet_nodes.tolist() == [0, 1, 2]
    tau, T0 = 7.0, np.array([37.0, 37.0, 37.0, 30.0])
    M = sys.M.toarray()
    g, m = sys.G_diag[3], M[3, 3]
    p = sys.P[3] - M[3, :3] @ T0[:3]
    expected = (p + g * T0[3] / tau) / (g / tau + m)
    new = step(TemperatureField(T0, mesh), sys, tau, linear_tol=1e-14)
    assert new.values[3] == pytest.approx(expected, rel=1e-12)
    assert np.array_equal(new.values[:3], T0[:3])
    assert new.time == tau and new.steps == 1


def test_step_keeps_dirichlet_values_exact():
    mesh = slab_mesh(8)
    sys = assemble(mesh, slab_props(q=2000.0), slab_config())
    T = TemperatureField(np.full(sys.n, 25.0), mesh)
    for _ in range(3):
        T = step(T, sys, 10.0)
        assert (T.values[sys.dirichlet_nodes] == 37.0).all()


def test_steady_state_is_fixed_point_of_step():
    mesh, sys, T = slab_solution(8, slab_props(q=2000.0))
    new = step(TemperatureField(T, mesh), sys, 100.0, linear_tol=1e-12)
    assert np.max(np.abs(new.values - T)) < 1e-9


def test_nonpositive_tau_rejected():
    mesh = slab_mesh(4)
    sys = assemble(mesh, slab_props(), slab_config())
    with pytest.raises(ConfigError):
        step(TemperatureField(np.full(sys.n, 37.0), mesh), sys, 0.0)
    with pytest.raises(ConfigError):
        SolverConfig(tau_s=-1.0).validate()


# --- linear solver ---------------------------------------------------------------

def test_linear_solve_examples(rng):
    assert np.allclose(linear_solve(sp.eye(5), np.arange(5.0)), np.arange(5.0))
    x = linear_solve(np.array([[4.0, 1.0], [1.0, 3.0]]), np.array([1.0, 2.0]), tol=1e-14)
    assert np.allclose(x, [1 / 11, 7 / 11], rtol=1e-12)
    B = rng.normal(size=(50, 50))
    A = B @ B.T + 50 * np.eye(50)
    b = rng.normal(size=50)
    x = linear_solve(A, b, tol=1e-12)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
    assert np.allclose(linear_solve(A, np.zeros(50)), 0)


def test_linear_solve_rejects_indefinite():
    with pytest.raises(SolverDiverged):
        linear_solve(np.array([[1.0, 0.0], [0.0, -1.0]]), np.array([1.0, 1.0]))


# --- steady benchmarks -----------------------------------------------------------

def test_uniform_core_temperature_is_exact_without_sources():
    mesh = slab_mesh(8)
    sys = assemble(mesh, slab_props(), slab_config(h_air=0.0))
    T = march(sys, mesh, slab_config(h_air=0.0, tau_s=100.0, steady_tol=1e-9, t0_c=30.0))
    assert np.allclose(T.values, 37.0, atol=1e-6)


def test_slab_surface_temperature_without_source():
    mesh, _, T = slab_solution(4, slab_props())
    top = mesh.nodes[:, 2] > SLAB_L - 1e-12
    assert np.allclose(T[top], surface_temperature_no_source(), atol=1e-10)
    # linear profile is reproduced exactly at every node
    assert np.allclose(T, slab_exact(mesh.nodes[:, 2]), atol=1e-10)


def test_slab_convergence_is_second_order():
    q = 2.0e4
    errs = []
    for n in (4, 8, 16):
        mesh, _, T = slab_solution(n, slab_props(q=q))
        errs.append(l2_error(mesh, T, lambda z: slab_exact(z, q=q)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert ((ratios > 3.2) & (ratios < 4.8)).all()
    assert np.log2(ratios[-1]) == pytest.approx(2.0, abs=0.2)


def test_march_agrees_with_direct_solve():
    mesh = slab_mesh(8)
    cfg = slab_config(tau_s=50.0, steady_tol=1e-10, t0_c=30.0)
    sys = assemble(mesh, slab_props(q=3000.0), cfg)
    T = march(sys, mesh, cfg)
    assert np.max(np.abs(T.values - direct_steady(sys))) < 1e-6
    assert T.steps > 1 and T.time == pytest.approx(T.steps * 50.0)


def robin_flux_out(mesh, T, h, t_air):
    robin = mesh.faces[mesh.face_kind == BoundaryKind.ROBIN]
    return h * float((mesh.face_areas(robin) * (T[robin].mean(axis=1) - t_air)).sum())


def test_flux_balance_on_phantom(coarse_mesh, reference_phantom):
    cfg = SolverConfig()
    sys = assemble(coarse_mesh, reference_phantom.properties, cfg)
    T = direct_steady(sys)
    d = sys.dirichlet_nodes
    inflow = float((sys.M @ T - sys.P)[d].sum())  # reaction at the held nodes
    source = float(sys.P.sum() - cfg.h_air * cfg.t_air_c * coarse_mesh.face_areas(
        coarse_mesh.faces[coarse_mesh.face_kind == BoundaryKind.ROBIN]).sum())
    out = robin_flux_out(coarse_mesh, T, cfg.h_air, cfg.t_air_c)
    assert out == pytest.approx(source + inflow, rel=1e-6)


def test_monotone_bounds(coarse_mesh, reference_phantom):
    mesh = coarse_mesh
    props = reference_phantom.properties
    cfg = SolverConfig(q_rad=0.0)
    T = direct_steady(assemble(mesh, props, cfg))
    assert T.min() >= min(cfg.t_air_c, cfg.t_core_c) - 1e-9
    q_max = max(p.q_met + p.q_can for p in props.values())
    k_min = min(p.k for p in props.values())
    extent = reference_phantom.radius + reference_phantom.base_thickness
    assert T.max() <= 37.0 + q_max * extent ** 2 / (2 * k_min)

    cold = {t: dataclasses.replace(p, q_met=0.0, q_can=0.0, q_rad=0.0) for t, p in props.items()}
    T0 = direct_steady(assemble(mesh, cold, cfg))
    assert T0.max() <= 37.0 + 1e-6
    assert T0.min() >= cfg.t_air_c


def test_surface_cooler_than_core_on_phantom(coarse_mesh, reference_phantom):
    T = march(assemble(coarse_mesh, reference_phantom.properties, STEADY), coarse_mesh, STEADY)
    robin = coarse_mesh.boundary_nodes(BoundaryKind.ROBIN)
    assert T.values[robin].mean() < 37.0
    assert np.isfinite(T.values).all()


def test_temperature_csv_format():
    mesh = slab_mesh(4)
    T = TemperatureField(np.full(mesh.n_nodes, 36.5), mesh)
    lines = temperature_csv(T).splitlines()
    assert lines[0] == "node_id,x,y,z,T"
    assert len(lines) == mesh.n_nodes + 1
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[4]) == 36.5
    assert np.allclose([float(v) for v in first[1:4]], mesh.nodes[0])


def test_ambient_parameters_shift_surface():
    warm = slab_solution(4, slab_props(), t_air_c=T_AIR + 5)[2]
    base = slab_solution(4, slab_props())[2]
    assert (warm >= base - 1e-12).all() and warm.max() > base.max() - 1e-12
