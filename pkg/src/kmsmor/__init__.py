"""Krylov modal subspace (KMS) model order reduction for weakly coupled
thermo-mechanical systems with parametric convective boundary conditions.

The public surface groups into: model assembly and io (systems, assembly,
mmio), reduction (modal, reduction, bilinear, mechanical), the a-priori
error bound (error_bound), and frequency-domain measurement (analysis).
"""
from .analysis import (EigenComparison, ErrorCurves, FrfResult, compare_eigenvalues,
                       frf, log_grid, relative_error_frf, thermo_mech_frf)
from .bilinear import bilinear_extend, eigen_monotonicity_check, reduced_eigen_error
from .error_bound import BoundReport, ErrorBudget, bound_check, estimator, select_cutoff
from .errors import ConfigError, KmsmorError, ModelValidationError, NumericalError
from .assembly import assemble_box_3d, assemble_plate_2d, assemble_rod_1d
from .grids import BoxGrid, PlateGrid
from .mechanical import (ReducedMechanicalModel, build_mech_basis, evaluate_deformation,
                         project_mechanical, static_displacement, thermal_body_forces)
from .mmio import (load_basis, load_bundle, load_system, save_basis, save_bundle,
                   save_system)
from .modal import compute_modal_basis, pencil_eigenpairs
from .reduction import (DEFAULT_EXPANSION_POINT, BasisTag, ReducedModel, ReductionBasis,
                        build_krylov_block, build_kms_basis, combine_kms, project)
from .systems import (BoundaryPatch, MaterialConfig, MechanicalSystem, ParameterSample,
                      ThermalSystem)

__version__ = "0.1.0"

__all__ = [
    "AMBIENT_PREFIX", "BasisTag", "BoundReport", "BoundaryPatch", "BoxGrid",
    "ConfigError", "DEFAULT_EXPANSION_POINT", "EigenComparison", "ErrorBudget",
    "ErrorCurves", "FrfResult", "KmsmorError", "MaterialConfig", "MechanicalSystem",
    "ModelValidationError", "NumericalError", "ParameterSample", "PlateGrid",
    "ReducedMechanicalModel", "ReducedModel", "ReductionBasis", "ThermalSystem",
    "assemble_box_3d", "assemble_plate_2d", "assemble_rod_1d", "bilinear_extend",
    "bound_check", "build_krylov_block", "build_kms_basis", "build_mech_basis",
    "combine_kms", "compare_eigenvalues", "compute_modal_basis",
    "eigen_monotonicity_check", "estimator", "evaluate_deformation", "frf",
    "load_basis", "load_bundle", "load_system", "log_grid", "pencil_eigenpairs",
    "project", "project_mechanical", "reduced_eigen_error", "relative_error_frf",
    "save_basis", "save_bundle", "save_system", "select_cutoff",
    "static_displacement", "thermal_body_forces", "thermo_mech_frf",
]
