"""Reduced quasi-static mechanical model driven by the reduced thermal state.

The mechanical inputs are the thermal body-force patterns reachable by the
reduced thermal state, K_th V, plus the external force columns.  A one-moment
Krylov basis at the static point (the model keeps no mass matrix, so the
solve is plain K^{-1} rhs) reproduces the static response of every such load
exactly.  The reference-temperature offset load K_th x_ref is appended as an
extra basis input so the affine solve K^{-1} K_th (V x~ - x_ref) is matched
too; when x_ref already lies in the reduced thermal range the extra column
deflates away.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as dla
import scipy.sparse.linalg as spla

from .errors import NumericalError
from .ortho import DROP_TOL, orthonormalize
from .reduction import BasisTag, ReductionBasis
from .systems import MechanicalSystem

MECH_TAG_THERMAL = "thermal_load"
MECH_TAG_REFERENCE = "reference_load"
MECH_TAG_EXTERNAL = "external_force"


def thermal_body_forces(mech: MechanicalSystem, basis: ReductionBasis) -> np.ndarray:
    """Independent thermal load patterns K_th V reachable by the reduced state."""
    if mech.n_thermal != basis.n:
        raise ValueError(f"K_th has {mech.n_thermal} thermal columns, basis has n={basis.n}")
    return np.asarray(mech.K_th @ basis.V)


def build_mech_basis(mech: MechanicalSystem, thermal_basis: ReductionBasis,
                     s_e_mech: float = 0.0, *, drop_tol: float = DROP_TOL) -> ReductionBasis:
    """One-moment Krylov basis over [K_th V, B_ext] at the static point.

    ``s_e_mech`` is accepted for interface symmetry but inert: without a
    mass matrix the quasi-static solve is K^{-1} rhs for any expansion point.
    """
    F_th = thermal_body_forces(mech, thermal_basis)
    rhs_blocks = [F_th]
    tags = [BasisTag("bilinear", patch=MECH_TAG_THERMAL, stage=0)] * F_th.shape[1]
    if mech.B_ext.shape[1]:
        rhs_blocks.append(mech.B_ext)
        tags += [BasisTag("bilinear", patch=MECH_TAG_EXTERNAL, stage=0)] * mech.B_ext.shape[1]
    rhs_blocks.append((mech.K_th @ mech.x_ref).reshape(-1, 1))
    tags.append(BasisTag("bilinear", patch=MECH_TAG_REFERENCE, stage=0))
    rhs = np.column_stack(rhs_blocks)
    try:
        lu = spla.splu(mech.K.tocsc())
        X = lu.solve(rhs)
    except RuntimeError as exc:
        raise NumericalError(f"stiffness factorization failed (singular K?): {exc}") from exc
    if not np.all(np.isfinite(X)):
        raise NumericalError("singular K: non-finite static solves")
    V, kept = orthonormalize(X, drop_tol=drop_tol)
    basis = ReductionBasis(V=V, tags=tuple(tags[j] for j in kept),
                           s_e=s_e_mech, omega_m=0.0)
    basis.validate()
    return basis


@dataclass(frozen=True)
class ReducedMechanicalModel:
    """Projected static model: K~ x~_mech = coupling x~ - f_ref + B_ext~ u_ext."""

    K: np.ndarray               # (r_m, r_m) projected stiffness
    coupling: np.ndarray        # (r_m, r_th) = V_m^T K_th V
    f_ref: np.ndarray           # (r_m,) = V_m^T K_th x_ref
    B_ext: np.ndarray           # (r_m, m_ext)
    C: np.ndarray               # (p, r_m)
    basis: ReductionBasis
    thermal_r: int
    kind: str = "mechanical"

    @property
    def r(self) -> int:
        return self.K.shape[0]

    def validate(self) -> None:
        asym = np.abs(self.K - self.K.T).max() if self.K.size else 0.0
        if asym > 1e-12 * max(np.abs(self.K).max(), 1e-300):
            raise NumericalError("projected stiffness not symmetric")
        if self.K.size and np.linalg.eigvalsh(self.K)[0] <= 0:
            raise NumericalError("projected stiffness not positive definite")


def project_mechanical(mech: MechanicalSystem, mech_basis: ReductionBasis,
                       thermal_basis: ReductionBasis) -> ReducedMechanicalModel:
    """One-sided projection of the mechanical system onto its Krylov basis."""
    Vm = mech_basis.V
    if Vm.shape[0] != mech.n_mech:
        raise ValueError(f"mech basis has {Vm.shape[0]} rows, system has {mech.n_mech}")
    K_r = Vm.T @ (mech.K @ Vm)
    K_r = 0.5 * (K_r + K_r.T)
    model = ReducedMechanicalModel(
        K=K_r,
        coupling=Vm.T @ np.asarray(mech.K_th @ thermal_basis.V),
        f_ref=Vm.T @ (mech.K_th @ mech.x_ref),
        B_ext=Vm.T @ mech.B_ext,
        C=mech.C @ Vm,
        basis=mech_basis,
        thermal_r=thermal_basis.r,
    )
    model.validate()
    return model


def evaluate_deformation(reduced_mech: ReducedMechanicalModel, x_tilde: np.ndarray,
                         u_ext: np.ndarray | None = None) -> np.ndarray:
    """Displacement outputs for a reduced thermal state and external forces.

    Solves K~ x~_mech = coupling x~ - f_ref + B_ext~ u_ext and returns
    C~ x~_mech.  Linear in (x_tilde, u_ext) apart from the constant
    reference-load offset.
    """
    x_tilde = np.asarray(x_tilde, dtype=float).ravel()
    if x_tilde.size != reduced_mech.coupling.shape[1]:
        raise ValueError(f"reduced thermal state has {x_tilde.size} entries, "
                         f"expected {reduced_mech.coupling.shape[1]}")
    load = reduced_mech.coupling @ x_tilde - reduced_mech.f_ref
    if u_ext is not None:
        u_ext = np.asarray(u_ext, dtype=float).ravel()
        if u_ext.size != reduced_mech.B_ext.shape[1]:
            raise ValueError(f"{u_ext.size} external forces given, "
                             f"expected {reduced_mech.B_ext.shape[1]}")
        load = load + reduced_mech.B_ext @ u_ext
    x_mech = dla.solve(reduced_mech.K, load, assume_a="pos")
    return reduced_mech.C @ x_mech


def static_displacement(mech: MechanicalSystem, x_thermal: np.ndarray,
                        u_ext: np.ndarray | None = None) -> np.ndarray:
    """Full-order static solve, the dense oracle for the reduced chain."""
    load = mech.thermal_load(x_thermal)
    if u_ext is not None:
        load = load + mech.B_ext @ np.asarray(u_ext, dtype=float).ravel()
    try:
        u = spla.splu(mech.K.tocsc()).solve(load)
    except RuntimeError as exc:
        raise NumericalError(f"singular stiffness: {exc}") from exc
    return mech.C @ u
