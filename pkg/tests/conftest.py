import numpy as np
import pytest

import kmsmor as km
from kmsmor.bilinear import bilinear_extend
from kmsmor.grids import BoxGrid
from kmsmor.mechanical import build_mech_basis, project_mechanical
from kmsmor.reduction import build_kms_basis, project

STEEL = km.MaterialConfig(density=7850.0, heat_capacity=500.0, conductivity=50.0,
                          young_modulus=210e9, poisson=0.3, expansion=1.2e-5,
                          reference_temperature=293.15)

#: acceptance error budget, shared by fixtures and the acceptance module
EPSILON = 0.05
OMEGA_MAX = 0.01
S_E = 1e-8
N_ME = 2
HTC_SAMPLES = ((1.0, 8.0), (4.0, 8.0), (4.0, 1.0), (50.0, 50.0))


@pytest.fixture(scope="session")
def steel():
    return STEEL


def make_fin_rod(num_elements=64, length=1.0, with_flux=True):
    """Rod with two disjoint multi-node convective spans (fin-style)."""
    h_el = length / num_elements
    patches = [
        km.BoundaryPatch(name="top", kind="convective",
                         facet_ids=tuple(range(0, num_elements // 2 - 2)),
                         weight_per_facet=h_el),
        km.BoundaryPatch(name="bottom", kind="convective",
                         facet_ids=tuple(range(num_elements // 2 + 2, num_elements + 1)),
                         weight_per_facet=h_el),
    ]
    if with_flux:
        patches.append(km.BoundaryPatch(name="drive", kind="heat_flux",
                                        facet_ids=(num_elements // 2,)))
    return km.assemble_rod_1d(num_elements, length, STEEL, patches)


def make_grounded_rod(num_elements=64, length=1.0, htc=1e12):
    """Dirichlet-like rod: huge-HTC penalty patches at both endpoints."""
    patches = [
        km.BoundaryPatch(name="left", kind="convective", facet_ids=(0,)),
        km.BoundaryPatch(name="right", kind="convective", facet_ids=(num_elements,)),
    ]
    system = km.assemble_rod_1d(num_elements, length, STEEL, patches)
    return system, km.ParameterSample((htc, htc))


def make_box(n=8, edge=0.125, mech_probe=(8, 8, 8)):
    grid = BoxGrid(n, n, n, edge, edge, edge)
    patches = [
        km.BoundaryPatch(name="top", kind="convective", facet_ids=grid.face_facets("z+")),
        km.BoundaryPatch(name="bottom", kind="convective", facet_ids=grid.face_facets("z-")),
        km.BoundaryPatch(name="support", kind="fixed_displacement",
                         facet_ids=grid.face_facets("z-")),
    ]
    probe = grid.node_id(*mech_probe)
    thermal, mech = km.assemble_box_3d(
        n, n, n, (edge, edge, edge), STEEL, patches,
        mech_outputs=[(probe, "x"), (probe, "y"), (probe, "z")])
    return grid, thermal, mech


@pytest.fixture(scope="session")
def fin_rod():
    return make_fin_rod()


@pytest.fixture(scope="session")
def grounded_rod():
    return make_grounded_rod()


@pytest.fixture(scope="session")
def small_box():
    """5x5x5 box (n=216 <= 500), used where dense full-system oracles run."""
    return make_box(n=5, edge=0.125, mech_probe=(5, 5, 5))


@pytest.fixture(scope="session")
def box_pipeline():
    """The acceptance model with its full reduction chain, built once."""
    grid, thermal, mech = make_box()
    omega_m = km.select_cutoff(EPSILON, OMEGA_MAX, S_E)
    kms = build_kms_basis(thermal, S_E, omega_m)
    basis = bilinear_extend(thermal, kms, N_ME)
    reduced = project(thermal, basis)
    mech_basis = build_mech_basis(mech, basis)
    reduced_mech = project_mechanical(mech, mech_basis, basis)
    return {
        "grid": grid, "thermal": thermal, "mech": mech,
        "omega_m": omega_m, "kms": kms, "basis": basis,
        "reduced": reduced, "mech_basis": mech_basis, "reduced_mech": reduced_mech,
        "samples": tuple(km.ParameterSample(h) for h in HTC_SAMPLES),
    }


@pytest.fixture(scope="session")
def rod_pipeline():
    """Reduced fin rod, the cheap pipeline used by many modules."""
    thermal = make_fin_rod()
    omega_m = km.select_cutoff(EPSILON, OMEGA_MAX, S_E)
    kms = build_kms_basis(thermal, S_E, omega_m)
    basis = bilinear_extend(thermal, kms, N_ME)
    reduced = project(thermal, basis)
    return {"thermal": thermal, "omega_m": omega_m, "kms": kms,
            "basis": basis, "reduced": reduced}
