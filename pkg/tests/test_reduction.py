import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import kmsmor as km
from kmsmor.modal import compute_modal_basis
from kmsmor.ortho import orthonormalize, orthonormality_defect
from kmsmor.reduction import (build_kms_basis, build_krylov_block, combine_kms,
                              project)
from conftest import S_E, make_fin_rod
from oracles import dense_frf, dense_pencil_eigenvalues


def test_orthonormalize_defect_and_projector():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 12))
    Q, kept = orthonormalize(X)
    assert orthonormality_defect(Q) <= 1e-12
    # projector property for any vector in the span
    y = X @ rng.standard_normal(12)
    assert np.linalg.norm(Q @ (Q.T @ y) - y) <= 1e-10 * np.linalg.norm(y)


def test_orthonormalize_deflates_duplicates():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(30)
    Q, kept = orthonormalize(np.column_stack([x, x]))
    assert Q.shape[1] == 1 and kept == [0]


def test_krylov_single_moment_is_single_solve_span(fin_rod):
    b = fin_rod.B[:, :1]
    V = build_krylov_block(fin_rod, S_E, rhs=b, moments=1)
    import scipy.sparse.linalg as spla
    x = spla.splu((S_E * fin_rod.E - fin_rod.A).tocsc()).solve(b)
    assert V.shape[1] == 1
    resid = x - V @ (V.T @ x)
    assert np.linalg.norm(resid) <= 1e-10 * np.linalg.norm(x)


def test_krylov_duplicate_columns_deflate(fin_rod):
    b = fin_rod.B[:, :1]
    V = build_krylov_block(fin_rod, S_E, rhs=np.column_stack([b, b]), moments=1)
    assert V.shape[1] == 1


def test_krylov_multi_moment_grows(fin_rod):
    V1 = build_krylov_block(fin_rod, S_E, moments=1)
    V2 = build_krylov_block(fin_rod, S_E, moments=2)
    assert V2.shape[1] > V1.shape[1]
    # nesting: first block spans a subset
    resid = V1 - V2 @ (V2.T @ V1)
    assert np.abs(resid).max() <= 1e-9


def grounded_nonparametric(fin_rod, htc=(4.0, 8.0)):
    """Fold fixed convection into A: a plain system with no traced parameter."""
    sample = km.ParameterSample(htc)
    return km.ThermalSystem(E=fin_rod.E, A=fin_rod.operator(sample), D=(),
                            B=fin_rod.effective_input(sample),
                            C=fin_rod.effective_input(sample).T)


def test_static_gain_moment_matching(fin_rod):
    # projection onto the Krylov block alone reproduces H(s_e); the system
    # is grounded so the static solve is well conditioned
    system = grounded_nonparametric(fin_rod)
    V = build_krylov_block(system, S_E)
    basis = combine_kms(np.zeros((system.n, 0)), V, s_e=S_E, omega_m=0.0)
    red = project(system, basis)
    Hf = dense_frf(system.E, system.operator(None), system.B, system.C, [S_E])[0]
    Hr = dense_frf(red.E, red.operator(None), red.B, red.C, [S_E])[0]
    assert np.abs((Hf - Hr) / Hf).max() <= 1e-8


def test_combine_kms_containment_and_direct_sum(fin_rod):
    Phi, alphas = compute_modal_basis(fin_rod, omega_m=0.02)
    mu = alphas.size
    # krylov inside the modal span: basis equals the modal basis
    inside = Phi @ np.ones((mu, 2))
    basis = combine_kms(Phi, inside, s_e=S_E, omega_m=0.02, modal_eigenvalues=alphas)
    assert basis.r == mu and basis.mu == mu
    # disjoint spans add up
    V = build_krylov_block(fin_rod, S_E)
    rank_k = V.shape[1]
    resid, _ = orthonormalize(V, against=orthonormalize(Phi)[0])
    extra = resid.shape[1]
    basis2 = combine_kms(Phi, V, s_e=S_E, omega_m=0.02, modal_eigenvalues=alphas)
    assert basis2.r == mu + extra
    tags = [t.kind for t in basis2.tags]
    assert tags == ["modal"] * mu + ["krylov"] * extra


def test_combine_kms_empty_inputs(fin_rod):
    empty = np.zeros((fin_rod.n, 0))
    basis = combine_kms(empty, empty, s_e=S_E, omega_m=0.02)
    assert basis.r == 0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_basis_reconstructs_span_members(seed):
    rod = make_fin_rod(num_elements=16)
    basis = build_kms_basis(rod, S_E, omega_m=0.05)
    rng = np.random.default_rng(seed)
    x = basis.V @ rng.standard_normal(basis.r)
    assert np.linalg.norm(basis.V @ (basis.V.T @ x) - x) <= 1e-10 * np.linalg.norm(x)


def test_modal_vectors_contained_in_kms(rod_pipeline):
    thermal = rod_pipeline["thermal"]
    basis = rod_pipeline["kms"]
    Phi, alphas = compute_modal_basis(thermal, basis.omega_m)
    for k in range(alphas.size):
        assert basis.contains(Phi[:, k], rtol=1e-8)


def test_kms_orthonormality_invariant(rod_pipeline, box_pipeline):
    for basis in (rod_pipeline["kms"], rod_pipeline["basis"],
                  box_pipeline["kms"], box_pipeline["basis"]):
        assert orthonormality_defect(basis.V) <= 1e-10
        basis.validate()


def test_identity_projection_reproduces_full_frf(fin_rod):
    # square orthonormal basis: reduced model is the full model in new coordinates
    Q, _ = orthonormalize(np.eye(fin_rod.n))
    basis = km.ReductionBasis(V=Q, tags=tuple(km.BasisTag("krylov") for _ in range(fin_rod.n)),
                              s_e=S_E, omega_m=0.0)
    red = project(fin_rod, basis)
    sample = km.ParameterSample((2.0, 5.0))
    omegas = np.logspace(-5, 0, 7)
    Hf = dense_frf(fin_rod.E, fin_rod.operator(sample), fin_rod.effective_input(sample),
                   fin_rod.C, omegas)
    Hr = dense_frf(red.E, red.operator(sample), red.effective_input(sample), red.C, omegas)
    assert np.abs((Hf - Hr) / Hf).max() <= 1e-12


def test_projection_preserves_stability(rod_pipeline):
    import scipy.linalg as dla
    red = rod_pipeline["reduced"]
    rng = np.random.default_rng(11)
    for _ in range(20):
        h = rng.uniform(0.0, 100.0, size=2)
        vals = dla.eigh(red.operator(km.ParameterSample(tuple(h))), red.E,
                        eigvals_only=True)
        assert vals.max() <= 1e-10


def test_projected_capacity_positive_definite(rod_pipeline):
    w = np.linalg.eigvalsh(rod_pipeline["reduced"].E)
    assert w[0] > 0


def test_moment_matching_invariant_all_pairs(rod_pipeline):
    # |h~_ij(s_e) - h_ij(s_e)| <= 1e-8 |h_ij(s_e)| on the n<=500 rod
    thermal, red = rod_pipeline["thermal"], rod_pipeline["reduced"]
    sample = km.ParameterSample((4.0, 8.0))
    Hf = dense_frf(thermal.E, thermal.operator(sample), thermal.effective_input(sample),
                   thermal.C, [S_E])[0]
    Hr = dense_frf(red.E, red.operator(sample), red.effective_input(sample),
                   red.C, [S_E])[0]
    assert np.abs((Hf - Hr) / Hf).max() <= 1e-8


def test_modal_exactness_at_zero_htc(rod_pipeline):
    # every reduced eigenvalue inside the cutoff matches a full eigenvalue
    import scipy.linalg as dla
    thermal, red = rod_pipeline["thermal"], rod_pipeline["reduced"]
    omega_m = rod_pipeline["omega_m"]
    red_vals = dla.eigh(red.A, red.E, eigvals_only=True)
    red_inside = red_vals[np.abs(red_vals) <= omega_m]
    full_vals = dense_pencil_eigenvalues(thermal.A, thermal.E)
    scale = np.abs(full_vals).max()
    for a in red_inside:
        if abs(a) <= 1e-12 * scale:
            assert np.abs(full_vals).min() <= 1e-12 * scale
            continue
        assert np.abs((full_vals - a) / a).min() <= 1e-8


def test_project_dimension_mismatch(fin_rod):
    Q, _ = orthonormalize(np.eye(fin_rod.n - 1)[:, :3])
    basis = km.ReductionBasis(V=Q, tags=tuple(km.BasisTag("krylov") for _ in range(3)),
                              s_e=S_E, omega_m=0.0)
    with pytest.raises(ValueError, match="rows"):
        project(fin_rod, basis)
