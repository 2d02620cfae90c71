"""Parametric extension of the KMS basis by bilinearization stages.

The parameter-dependent term sum_i h_i D_i x is treated as a state-dependent
input: each convective patch contributes the block Krylov sequence

    V^0 = V_KMS,    V^k = (s_e E - A)^{-1} D_i V^{k-1},   k = 1 .. n_me

and the extended basis is the orthonormalized union over all patches.  The
stage recursion is applied to the raw (column-rescaled) previous block, so
every stage contributes exactly r candidate columns and the pre-deflation
width is r (1 + n_me n_c) by construction; deflation happens once while the
union is orthonormalized (patches in declaration order, stages inner), and
both widths are recorded.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as dla

from .analysis import EigenComparison, compare_eigenvalues
from .errors import NumericalError
from .modal import pencil_eigenpairs
from .ortho import DROP_TOL, orthonormalize
from .reduction import BasisTag, ReducedModel, ReductionBasis, shifted_factorization
from .systems import ParameterSample, ThermalSystem

DEFAULT_BILINEAR_ITERATIONS = 2


def bilinear_extend(system: ThermalSystem, kms: ReductionBasis,
                    n_me: int = DEFAULT_BILINEAR_ITERATIONS, *,
                    drop_tol: float = DROP_TOL) -> ReductionBasis:
    """Extend a KMS basis so the reduced model stays valid for any HTC value.

    n_me = 0 returns the basis unchanged.  n_me must stay below the dof
    count of the smallest convective patch, the rank of the per-patch map.
    One factorization of (s_e E - A) is shared by all stages and patches.
    """
    if n_me < 0:
        raise ValueError("n_me must be nonnegative")
    if kms.V.shape[0] != system.n:
        raise ValueError(f"basis has {kms.V.shape[0]} rows, system has n={system.n}")
    if n_me == 0 or system.n_c == 0:
        return ReductionBasis(V=kms.V, tags=kms.tags, s_e=kms.s_e, omega_m=kms.omega_m,
                              pre_deflation_width=kms.r)
    patch_dofs = [int((Di.diagonal() != 0).sum()) for Di in system.D]
    smallest = min(patch_dofs)
    if n_me >= smallest:
        raise ValueError(f"n_me={n_me} must be < the smallest patch dof count ({smallest})")

    lu = shifted_factorization(system, kms.s_e)
    V = kms.V
    tags = list(kms.tags)
    r = kms.r
    pre_width = r
    for name, Di in zip(system.patch_names, system.D):
        W = kms.V
        for stage in range(1, n_me + 1):
            W = np.asarray(lu.solve(Di @ W))
            # rescale columns only: keeps the stage span and the exact
            # candidate count while avoiding overflow across stages
            norms = np.linalg.norm(W, axis=0)
            norms[norms == 0] = 1.0
            W = W / norms
            pre_width += W.shape[1]
            fresh, _ = orthonormalize(W, against=V, drop_tol=drop_tol)
            if fresh.shape[1]:
                V = np.column_stack([V, fresh])
                tags += [BasisTag("bilinear", patch=name, stage=stage)
                         for _ in range(fresh.shape[1])]
    assert pre_width == r * (1 + n_me * system.n_c)
    extended = ReductionBasis(V=V, tags=tuple(tags), s_e=kms.s_e, omega_m=kms.omega_m,
                              pre_deflation_width=pre_width)
    extended.validate()
    return extended


def eigen_monotonicity_check(system: ThermalSystem, sample_low: ParameterSample,
                             sample_high: ParameterSample, k: int,
                             slack: float = 1e-10) -> dict:
    """Verify that raising the HTC pushes every eigenvalue further negative.

    Requires h_low <= h_high elementwise.  Compares the k smallest-magnitude
    eigenvalues of both pencils in sorted order; degenerate pairs get an
    absolute slack.  Returns a report dict; violations are findings.
    """
    hl = np.asarray(sample_low.htc)
    hm = np.asarray(sample_high.htc)
    if hl.shape != hm.shape or len(hl) != system.n_c:
        raise ValueError("samples must cover every convective patch")
    if np.any(hm < hl):
        raise ValueError("need h_low <= h_high elementwise")
    vals_l, _ = pencil_eigenpairs(system.operator(sample_low), system.E, k)
    vals_m, _ = pencil_eigenpairs(system.operator(sample_high), system.E, k)
    # magnitude-ascending equals value-descending for nonpositive spectra
    diffs = vals_m - vals_l
    ok = bool(np.all(diffs <= slack))
    return {
        "ok": ok,
        "eigenvalues_low": vals_l,
        "eigenvalues_high": vals_m,
        "max_violation": float(np.max(diffs)) if diffs.size else 0.0,
    }


def reduced_eigen_error(full: ThermalSystem, reduced: ReducedModel,
                        sample: ParameterSample, k: int) -> EigenComparison:
    """Per-mode relative eigenvalue errors; shared implementation in analysis."""
    return compare_eigenvalues(full, reduced, sample, k)
