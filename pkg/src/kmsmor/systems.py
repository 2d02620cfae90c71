"""Core system containers for the thermal and mechanical state-space models.

The thermal model is the first-order system

    E x'(t) = A x(t) + sum_i h_i(t) D_i x(t) + B u(t),    y = C x(t)

with a symmetric positive-definite capacity matrix E, a symmetric negative
semi-definite conduction matrix A, and one diagonal negative semi-definite
convection matrix D_i per named boundary patch.  The quasi-static mechanical
model is K x_mech = K_th (x - x_ref) + B_ext u_ext with y_mech = C x_mech.

All containers are immutable value objects; assembly and io functions return
fully validated instances that are safe to share between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ModelValidationError

#: prefix used in input labels for ambient-temperature channels
AMBIENT_PREFIX = "ambient:"
FLUX_PREFIX = "flux:"

PATCH_KINDS = ("convective", "heat_flux", "fixed_displacement")
AXES = ("x", "y", "z")


@dataclass(frozen=True)
class MaterialConfig:
    """Isotropic material constants (SI units)."""

    density: float                  # rho, kg/m^3
    heat_capacity: float            # c_p, J/(kg K)
    conductivity: float             # lambda, W/(m K)
    young_modulus: float = 210e9    # Pa
    poisson: float = 0.3            # dimensionless
    expansion: float = 1.2e-5       # 1/K
    reference_temperature: float = 293.15  # K

    def __post_init__(self):
        if self.density <= 0:
            raise ModelValidationError("material", "density > 0")
        if self.heat_capacity <= 0:
            raise ModelValidationError("material", "heat_capacity > 0")
        if self.conductivity <= 0:
            raise ModelValidationError("material", "conductivity > 0")
        if self.young_modulus <= 0:
            raise ModelValidationError("material", "young_modulus > 0")
        if not 0 <= self.poisson < 0.5:
            raise ModelValidationError("material", "0 <= poisson < 0.5")
        if self.expansion < 0:
            raise ModelValidationError("material", "expansion >= 0")

    @property
    def diffusivity(self) -> float:
        """Thermal diffusivity lambda / (rho c_p) in m^2/s."""
        return self.conductivity / (self.density * self.heat_capacity)


@dataclass(frozen=True)
class BoundaryPatch:
    """A named set of mesh facets carrying one boundary condition.

    ``weight_per_facet`` scales the facet measure (w(z) in the separated
    form h(t, z) = h(t) w(z)); a scalar applies to every facet.  For rods a
    facet is a node index and its measure is the bare weight, so the weight
    carries the full exchange surface.  ``directions`` and
    ``spring_stiffness`` apply to fixed_displacement patches only: a spring
    stiffness of None eliminates the constrained dofs, a finite value adds
    penalty springs (per node and direction, N/m).
    """

    name: str
    facet_ids: tuple[int, ...]
    kind: str = "convective"
    weight_per_facet: tuple[float, ...] | float = 1.0
    directions: tuple[str, ...] = AXES
    spring_stiffness: float | None = None

    def __post_init__(self):
        if self.kind not in PATCH_KINDS:
            raise ModelValidationError(self.name, "kind", f"unknown kind {self.kind!r}")
        object.__setattr__(self, "facet_ids", tuple(int(i) for i in self.facet_ids))
        if not self.facet_ids:
            raise ModelValidationError(self.name, "nonempty facets", "zero-measure patch")
        w = self.weight_per_facet
        if np.isscalar(w):
            w = tuple(float(w) for _ in self.facet_ids)
        else:
            w = tuple(float(x) for x in w)
            if len(w) != len(self.facet_ids):
                raise ModelValidationError(self.name, "weight count", "one weight per facet required")
        if any(x < 0 for x in w):
            raise ModelValidationError(self.name, "weights >= 0")
        object.__setattr__(self, "weight_per_facet", w)
        bad = [d for d in self.directions if d not in AXES]
        if bad:
            raise ModelValidationError(self.name, "directions", f"unknown axis {bad[0]!r}")
        if self.spring_stiffness is not None and self.spring_stiffness <= 0:
            raise ModelValidationError(self.name, "spring_stiffness > 0")


@dataclass(frozen=True)
class ParameterSample:
    """One HTC value per convective patch, ordered as the system's patches (W/(m^2 K))."""

    htc: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "htc", tuple(float(h) for h in self.htc))
        if any(h < 0 for h in self.htc):
            raise ModelValidationError("sample", "htc >= 0")

    @classmethod
    def from_mapping(cls, patch_names: Sequence[str], values: Mapping[str, float]) -> "ParameterSample":
        missing = [p for p in patch_names if p not in values]
        if missing:
            raise ModelValidationError("sample", "patch coverage", f"missing HTC for {missing}")
        unknown = [p for p in values if p not in patch_names]
        if unknown:
            raise ModelValidationError("sample", "patch names", f"unknown patch {unknown[0]!r}")
        return cls(tuple(float(values[p]) for p in patch_names))

    @classmethod
    def zeros(cls, n_patches: int) -> "ParameterSample":
        return cls((0.0,) * n_patches)

    def label(self) -> str:
        return "h" + "_".join(f"{v:g}" for v in self.htc)


def _max_abs(M) -> float:
    if sp.issparse(M):
        return abs(M).max() if M.nnz else 0.0
    return float(np.abs(M).max()) if M.size else 0.0


def _check_symmetric(M, name: str, rtol: float = 1e-12) -> None:
    scale = _max_abs(M)
    asym = _max_abs(M - M.T)
    if asym > rtol * max(scale, 1e-300):
        raise ModelValidationError(name, "symmetry", f"|M - M^T|_max = {asym:.3e}")


def _smallest_eigenvalue(M) -> float:
    """Cheap smallest-eigenvalue probe for definiteness checks."""
    A = M.toarray() if sp.issparse(M) else np.asarray(M)
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


@dataclass(frozen=True)
class ThermalSystem:
    """Affine parametric thermal state-space model (see module docstring).

    Convective patches enter through the diagonal matrices ``D`` (ordered as
    ``patch_names``).  Ambient-temperature input channels are stored
    unscaled in ``B``; the HTC multiplier is applied at evaluation time.
    Input labels follow the convention ``ambient:<patch>`` / ``flux:<patch>``.
    """

    E: sp.spmatrix
    A: sp.spmatrix
    D: tuple[sp.spmatrix, ...]
    B: np.ndarray
    C: np.ndarray
    patch_names: tuple[str, ...] = ()
    input_labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "E", sp.csc_matrix(self.E))
        object.__setattr__(self, "A", sp.csc_matrix(self.A))
        object.__setattr__(self, "D", tuple(sp.csc_matrix(Di) for Di in self.D))
        object.__setattr__(self, "B", np.atleast_2d(np.asarray(self.B, dtype=float)))
        object.__setattr__(self, "C", np.atleast_2d(np.asarray(self.C, dtype=float)))
        object.__setattr__(self, "patch_names", tuple(self.patch_names))
        if not self.input_labels:
            object.__setattr__(self, "input_labels",
                               tuple(f"u{j}" for j in range(self.B.shape[1])))
        else:
            object.__setattr__(self, "input_labels", tuple(self.input_labels))

    @property
    def n(self) -> int:
        return self.E.shape[0]

    @property
    def n_c(self) -> int:
        return len(self.D)

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def ambient_columns(self) -> dict[str, int]:
        """Map patch name -> B column index of its ambient-temperature channel."""
        out = {}
        for j, lab in enumerate(self.input_labels):
            if lab.startswith(AMBIENT_PREFIX):
                out[lab[len(AMBIENT_PREFIX):]] = j
        return out

    def operator(self, sample: ParameterSample | None = None) -> sp.csc_matrix:
        """A + sum_i h_i D_i at the given parameter sample."""
        A_d = self.A
        if sample is not None:
            if len(sample.htc) != self.n_c:
                raise ModelValidationError("sample", "length", f"expected {self.n_c} HTC values")
            for h, Di in zip(sample.htc, self.D):
                if h != 0.0:
                    A_d = A_d + h * Di
        return sp.csc_matrix(A_d)

    def effective_input(self, sample: ParameterSample | None = None) -> np.ndarray:
        """B with ambient-temperature columns scaled by their patch HTC."""
        Beff = self.B.copy()
        if sample is not None:
            cols = self.ambient_columns
            for name, h in zip(self.patch_names, sample.htc):
                j = cols.get(name)
                if j is not None:
                    Beff[:, j] *= h
        return Beff

    def validate(self, rtol: float = 1e-12) -> None:
        """Check all structural invariants; raises ModelValidationError."""
        n = self.n
        for name, M, shape in (("E", self.E, (n, n)), ("A", self.A, (n, n)),
                               ("B", self.B, (n, self.B.shape[1])), ("C", self.C, (self.C.shape[0], n))):
            if M.shape != shape:
                raise ModelValidationError(name, "shape", f"{M.shape} != {shape}")
        _check_symmetric(self.E, "E", rtol)
        _check_symmetric(self.A, "A", rtol)
        if _smallest_eigenvalue(self.E) <= 0:
            raise ModelValidationError("E", "positive definiteness")
        amax = _max_abs(self.A)
        if -_smallest_eigenvalue(-self.A) > 1e-10 * max(amax, 1e-300):
            raise ModelValidationError("A", "negative semi-definiteness")
        if len(self.patch_names) != self.n_c:
            raise ModelValidationError("D", "patch naming", "one name per convection matrix")
        supports = []
        for name, Di in zip(self.patch_names, self.D):
            if Di.shape != (n, n):
                raise ModelValidationError(f"D[{name}]", "shape")
            off = Di - sp.diags(Di.diagonal())
            if off.nnz and _max_abs(off) > rtol * max(_max_abs(Di), 1e-300):
                raise ModelValidationError(f"D[{name}]", "diagonality")
            diag = Di.diagonal()
            if np.any(diag > 1e-14 * max(_max_abs(Di), 1e-300)):
                raise ModelValidationError(f"D[{name}]", "nonpositive entries")
            supports.append(diag != 0)
        for i in range(len(supports)):
            for j in range(i + 1, len(supports)):
                if np.any(supports[i] & supports[j]):
                    raise ModelValidationError(
                        f"D[{self.patch_names[i]}]", "disjoint supports",
                        f"overlaps D[{self.patch_names[j]}]")
        if len(self.input_labels) != self.n_inputs:
            raise ModelValidationError("B", "input labels", "one label per column")


@dataclass(frozen=True)
class MechanicalSystem:
    """Quasi-static elastic model coupled to the thermal state.

    ``K`` acts on the free dofs after constraint elimination; ``free_dofs``
    maps them back into the full 3-per-node dof vector (identity when no
    dof was eliminated).  ``x_ref`` is the stress-free reference temperature
    vector of the thermal model.
    """

    K: sp.spmatrix
    K_th: sp.spmatrix
    B_ext: np.ndarray
    C: np.ndarray
    x_ref: np.ndarray
    free_dofs: np.ndarray | None = None
    n_full: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "K", sp.csc_matrix(self.K))
        object.__setattr__(self, "K_th", sp.csc_matrix(self.K_th))
        B = np.asarray(self.B_ext, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1) if B.size else B.reshape(self.K.shape[0], 0)
        object.__setattr__(self, "B_ext", B)
        object.__setattr__(self, "C", np.atleast_2d(np.asarray(self.C, dtype=float)))
        object.__setattr__(self, "x_ref", np.asarray(self.x_ref, dtype=float).ravel())
        if self.free_dofs is not None:
            object.__setattr__(self, "free_dofs", np.asarray(self.free_dofs, dtype=int))

    @property
    def n_mech(self) -> int:
        return self.K.shape[0]

    @property
    def n_thermal(self) -> int:
        return self.K_th.shape[1]

    def thermal_load(self, x: np.ndarray) -> np.ndarray:
        """K_th (x - x_ref) for a full thermal state x."""
        return self.K_th @ (np.asarray(x, dtype=float) - self.x_ref)

    def validate(self, rtol: float = 1e-12) -> None:
        _check_symmetric(self.K, "K", rtol)
        if self.K_th.shape[0] != self.n_mech:
            raise ModelValidationError("K_th", "shape", "rows must match mechanical dofs")
        if self.x_ref.size != self.n_thermal:
            raise ModelValidationError("x_ref", "shape", "length must match thermal dofs")
        if _smallest_eigenvalue(self.K) <= 0:
            raise ModelValidationError("K", "positive definiteness",
                                       "unconstrained mechanical system (K singular)")
