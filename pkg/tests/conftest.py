"""Shared fixtures: reference phantoms, meshes and solved fields.

Expensive objects are session-scoped so the unit tests and the acceptance
checks reuse one solve.
"""

import dataclasses

import numpy as np
import pytest

from rtmsim.bioheat import SolverConfig, solve_steady
from rtmsim.phantom import PhantomSpec, TissueType, build_phantom, tetrahedralize
from rtmsim.phantom.tissues import TissueProperties, default_property_map
from rtmsim.radiometry import RadiometryConfig, measure_phantom

# converged-march settings used wherever a steady field is needed
STEADY = SolverConfig(tau_s=600.0, steady_tol=1e-7)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def uniform_props(**kw) -> dict:
    """Same properties for every tissue (gland defaults unless overridden)."""
    base = default_property_map(1.5e9)[TissueType.MammaryGland]
    p = dataclasses.replace(base, **kw)
    return {t: p for t in TissueType}


def slab_props(k=0.5, q=0.0) -> dict:
    p = TissueProperties(rho=1000.0, c_p=3000.0, k=k, q_met=q, q_can=0.0, q_rad=0.0,
                         sigma=1.0, eps_r=50.0, mu_r=1.0)
    return {t: p for t in TissueType}


# a small lobule- and vessel-free phantom for homogeneous-medium checks
HOMOGENEOUS_SPEC = PhantomSpec(radius_m=0.05, base_thickness_m=0.01, lobule_count=(0, 0),
                               vessel_trees=0, connective_count=0, variability_default=0.0)


@pytest.fixture(scope="session")
def reference_spec():
    return PhantomSpec(seed=0)


@pytest.fixture(scope="session")
def reference_phantom(reference_spec):
    return build_phantom(reference_spec)


@pytest.fixture(scope="session")
def coarse_mesh(reference_phantom):
    """Reference phantom at a 2 cm target edge (fast solver checks)."""
    return tetrahedralize(reference_phantom, 0.02)


@pytest.fixture(scope="session")
def reference_mesh(reference_phantom):
    """Reference phantom at the 1.2 cm edge used for cohorts."""
    return tetrahedralize(reference_phantom, 0.012)


@pytest.fixture(scope="session")
def fig2_case(reference_spec):
    """Tumor of radius 1 cm under point 3 at the desk mesh resolution (8 mm)."""
    spec = reference_spec.with_tumor(present=True, point=3, radius_m=0.01)
    phantom = build_phantom(spec)
    mesh = tetrahedralize(phantom, 0.008)
    rec, T, pds = measure_phantom(phantom, STEADY, RadiometryConfig(), "S0000", mesh=mesh,
                                  return_fields=True)
    return {"phantom": phantom, "mesh": mesh, "record": rec, "T": T, "pds": pds}


@pytest.fixture(scope="session")
def homogeneous_case():
    """Homogeneous strongly lossy phantom (sigma = 20 S/m, eps_r = 50)."""
    props = uniform_props(sigma=20.0, eps_r=50.0)
    phantom = build_phantom(HOMOGENEOUS_SPEC, props)
    mesh = tetrahedralize(phantom, 0.005)
    T = solve_steady(mesh, props, STEADY)
    return {"phantom": phantom, "props": props, "mesh": mesh, "T": T}


@pytest.fixture(scope="session")
def homogeneous_maxwell(homogeneous_case):
    """FDTD and analytic P_d for antenna points 0 and 3 on the homogeneous phantom."""
    from rtmsim.radiometry.power import grid_from_phantom, power_density_analytic, power_density_maxwell

    c = homogeneous_case
    grid = grid_from_phantom(c["phantom"], 1.5e9)
    out = {}
    for i in (0, 3):
        out[i] = {
            "analytic": power_density_analytic(c["mesh"], c["props"], i, 1.5e9, c["phantom"].points),
            "maxwell": power_density_maxwell(c["phantom"], c["mesh"], i, 1.5e9, grid=grid, cycles=8),
        }
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
