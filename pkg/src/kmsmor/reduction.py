"""Krylov modal subspace construction and one-sided Galerkin projection.

The reduction subspace is the sum of a one-moment (block) Krylov subspace
at a low-frequency expansion point s_e and the span of all eigenvectors
with |alpha| <= omega_m.  Projection is one-sided (test basis equals trial
basis), which preserves stability of the symmetric negative semi-definite
pencil: x^T (A + sum h_i D_i) x <= 0 survives congruence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError
from .modal import compute_modal_basis
from .ortho import DROP_TOL, orthonormalize, orthonormality_defect
from .systems import ParameterSample, ThermalSystem

#: default expansion frequency in rad/s, low enough to pin the steady state
DEFAULT_EXPANSION_POINT = 1e-8
ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class BasisTag:
    """Provenance of one basis column: modal(k) | krylov | bilinear(patch, stage)."""

    kind: str                       # "modal" | "krylov" | "bilinear"
    mode: int | None = None         # modal index (0-based, |alpha| ascending)
    eigenvalue: float | None = None
    patch: str | None = None        # bilinear: source convective patch
    stage: int | None = None        # bilinear: iteration number (1-based)

    def __str__(self) -> str:
        if self.kind == "modal":
            return f"modal:{self.mode}:{self.eigenvalue!r}"
        if self.kind == "bilinear":
            return f"bilinear:{self.patch}:{self.stage}"
        return "krylov"

    @classmethod
    def parse(cls, text: str) -> "BasisTag":
        parts = text.split(":")
        if parts[0] == "modal":
            return cls("modal", mode=int(parts[1]), eigenvalue=float(parts[2]))
        if parts[0] == "bilinear":
            return cls("bilinear", patch=":".join(parts[1:-1]), stage=int(parts[-1]))
        if parts[0] == "krylov":
            return cls("krylov")
        raise ValueError(f"unknown basis tag {text!r}")


@dataclass(frozen=True)
class ReductionBasis:
    """Column-orthonormal reduction basis with per-column provenance.

    ``mu`` modal columns lead; they span the truncated modal subspace
    exactly (the eigenvectors themselves are E-orthonormal, hence not
    Euclidean-orthonormal; the span is re-orthonormalized in the Euclidean
    sense and the nested prefix property of Gram-Schmidt keeps column k
    aligned with the first k modes).
    """

    V: np.ndarray
    tags: tuple[BasisTag, ...]
    s_e: float
    omega_m: float
    pre_deflation_width: int | None = None

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.tags) != V.shape[1]:
            raise ValueError("one provenance tag per basis column required")

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def r(self) -> int:
        return self.V.shape[1]

    @property
    def mu(self) -> int:
        return sum(1 for t in self.tags if t.kind == "modal")

    @property
    def modal_eigenvalues(self) -> np.ndarray:
        return np.array([t.eigenvalue for t in self.tags if t.kind == "modal"])

    def validate(self) -> None:
        if self.r > self.n:
            raise NumericalError(f"basis has r={self.r} > n={self.n}")
        defect = orthonormality_defect(self.V)
        if defect > ORTHO_TOL:
            raise NumericalError(f"basis orthonormality defect {defect:.3e} > {ORTHO_TOL:g}")

    def contains(self, x: np.ndarray, rtol: float = 1e-8) -> bool:
        """True when x lies in span(V) up to rtol."""
        x = np.asarray(x, dtype=float)
        resid = x - self.V @ (self.V.T @ x)
        return np.linalg.norm(resid) <= rtol * max(np.linalg.norm(x), 1e-300)


@dataclass(frozen=True)
class ReducedModel:
    """Projected thermal model: dense matrices plus the basis that made them."""

    E: np.ndarray
    A: np.ndarray
    D: tuple[np.ndarray, ...]
    B: np.ndarray
    C: np.ndarray
    basis: ReductionBasis
    patch_names: tuple[str, ...] = ()
    input_labels: tuple[str, ...] = ()
    kind: str = "thermal"

    @property
    def r(self) -> int:
        return self.E.shape[0]

    @property
    def n_c(self) -> int:
        return len(self.D)

    @property
    def ambient_columns(self) -> dict[str, int]:
        from .systems import AMBIENT_PREFIX
        return {lab[len(AMBIENT_PREFIX):]: j for j, lab in enumerate(self.input_labels)
                if lab.startswith(AMBIENT_PREFIX)}

    def operator(self, sample: ParameterSample | None = None) -> np.ndarray:
        A_d = self.A.copy()
        if sample is not None:
            for h, Di in zip(sample.htc, self.D):
                if h != 0.0:
                    A_d += h * Di
        return A_d

    def effective_input(self, sample: ParameterSample | None = None) -> np.ndarray:
        Beff = self.B.copy()
        if sample is not None:
            cols = self.ambient_columns
            for name, h in zip(self.patch_names, sample.htc):
                j = cols.get(name)
                if j is not None:
                    Beff[:, j] *= h
        return Beff


def shifted_factorization(system: ThermalSystem, s_e: float) -> spla.SuperLU:
    """LU factorization of (s_e E - A); raises NumericalError when singular."""
    if s_e <= 0:
        raise ValueError("expansion point s_e must be positive")
    try:
        return spla.splu((s_e * system.E - system.A).tocsc())
    except RuntimeError as exc:
        raise NumericalError(f"factorization of (s_e E - A) failed at s_e={s_e:g}: {exc}") from exc


def build_krylov_block(system: ThermalSystem, s_e: float,
                       rhs: np.ndarray | None = None, moments: int = 1, *,
                       drop_tol: float = DROP_TOL) -> np.ndarray:
    """Orthonormal block-Arnoldi basis of the moment-matching Krylov subspace.

    With moments=1 this is the orthonormalized image of (s_e E - A)^{-1} rhs;
    higher moments iterate the map (s_e E - A)^{-1} E with deflation.  ``rhs``
    defaults to the system input matrix B.
    """
    if moments < 1:
        raise ValueError("moments must be >= 1")
    rhs = system.B if rhs is None else np.atleast_2d(np.asarray(rhs, dtype=float))
    if rhs.shape[0] != system.n:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, system has n={system.n}")
    lu = shifted_factorization(system, s_e)
    block, _ = orthonormalize(lu.solve(rhs), drop_tol=drop_tol)
    V = block
    for _ in range(1, moments):
        if block.shape[1] == 0:
            break
        block, _ = orthonormalize(lu.solve(system.E @ block), against=V, drop_tol=drop_tol)
        if block.shape[1]:
            V = np.column_stack([V, block])
    return V


def combine_kms(modal: np.ndarray, krylov: np.ndarray, *, s_e: float, omega_m: float,
                modal_eigenvalues: np.ndarray | None = None,
                drop_tol: float = DROP_TOL) -> ReductionBasis:
    """Orthonormal basis of the subspace sum of modal and Krylov blocks.

    Modal columns lead and are re-orthonormalized in the Euclidean sense
    (eigenvectors are independent, so none deflate and the span is kept
    verbatim); Krylov columns are orthogonalized against them and deflated.
    Empty inputs are fine and produce an empty basis.
    """
    modal = np.atleast_2d(np.asarray(modal, dtype=float))
    krylov = np.atleast_2d(np.asarray(krylov, dtype=float))
    if modal.size and krylov.size and modal.shape[0] != krylov.shape[0]:
        raise ValueError("modal and krylov blocks must share the row dimension")
    Vm, kept = orthonormalize(modal, drop_tol=drop_tol)
    if modal.shape[1] and len(kept) != modal.shape[1]:
        raise NumericalError("modal block is rank deficient; eigenvectors should be independent")
    if modal_eigenvalues is None:
        modal_eigenvalues = np.full(Vm.shape[1], np.nan)
    tags = [BasisTag("modal", mode=k, eigenvalue=float(modal_eigenvalues[k]))
            for k in range(Vm.shape[1])]
    Vk, _ = orthonormalize(krylov, against=Vm if Vm.shape[1] else None, drop_tol=drop_tol)
    tags += [BasisTag("krylov") for _ in range(Vk.shape[1])]
    if Vm.shape[1] and Vk.shape[1]:
        V = np.column_stack([Vm, Vk])
    elif Vm.shape[1]:
        V = Vm
    else:
        V = Vk
    basis = ReductionBasis(V=V, tags=tuple(tags), s_e=s_e, omega_m=omega_m)
    basis.validate()
    return basis


def build_kms_basis(system: ThermalSystem, s_e: float, omega_m: float, *,
                    moments: int = 1, htc_at_assembly: ParameterSample | None = None,
                    max_modes: int = 500) -> ReductionBasis:
    """Convenience pipeline: modal cutoff + one-moment Krylov + combination."""
    Phi, alphas = compute_modal_basis(system, omega_m, htc_at_assembly, max_modes=max_modes)
    Vk = build_krylov_block(system, s_e, moments=moments)
    return combine_kms(Phi, Vk, s_e=s_e, omega_m=omega_m, modal_eigenvalues=alphas)


def _project_symmetric(M: sp.spmatrix, V: np.ndarray, name: str) -> np.ndarray:
    scale = abs(M).max() if M.nnz else 0.0
    asym = abs(M - M.T).max() if (M - M.T).nnz else 0.0
    if asym > 1e-12 * max(scale, 1e-300):
        raise NumericalError(f"{name} is not symmetric enough to project: |M-M^T|={asym:.3e}")
    P = V.T @ (M @ V)
    return 0.5 * (P + P.T)


def project(system, basis: ReductionBasis, thermal_basis: ReductionBasis | None = None):
    """One-sided Galerkin projection of a thermal or mechanical system.

    For a ThermalSystem returns a ReducedModel; for a MechanicalSystem the
    thermal basis is required and the call is forwarded to
    mechanical.project_mechanical.
    """
    from .systems import MechanicalSystem

    if isinstance(system, MechanicalSystem):
        from .mechanical import project_mechanical
        if thermal_basis is None:
            raise ValueError("projecting a mechanical system requires the thermal basis")
        return project_mechanical(system, basis, thermal_basis)
    if basis.V.shape[0] != system.n:
        raise ValueError(f"basis has {basis.V.shape[0]} rows, system has n={system.n}")
    V = basis.V
    return ReducedModel(
        E=_project_symmetric(system.E, V, "E"),
        A=_project_symmetric(system.A, V, "A"),
        D=tuple(_project_symmetric(Di, V, f"D[{nm}]")
                for nm, Di in zip(system.patch_names, system.D)),
        B=V.T @ system.B,
        C=system.C @ V,
        basis=basis,
        patch_names=system.patch_names,
        input_labels=system.input_labels,
    )
