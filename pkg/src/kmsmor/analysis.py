"""Frequency-response evaluation and error measurement for full and reduced models.

Transfer functions are evaluated pointwise as

    H(j omega) = C (j omega E - A - sum h_i D_i)^{-1} B_eff

where ambient-temperature input columns of B are scaled by their patch HTC
(the stored channels are unscaled).  Full systems use a sparse complex
factorization per frequency; reduced models use dense solves.  Frequency
points are embarrassingly parallel and are assembled in grid order, so
results are deterministic regardless of the worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError
from .reduction import ReducedModel
from .systems import MechanicalSystem, ParameterSample, ThermalSystem

#: |h| below this is treated as an undefined relative-error point
UNDEFINED_FLOOR = 1e-300

THREAD_ENV_VAR = "KMSMOR_THREADS"


def log_grid(lo: float, hi: float, points: int) -> np.ndarray:
    """Logarithmic frequency grid, the convention used by all reports."""
    if lo <= 0 or hi <= lo or points < 2:
        raise ValueError("need 0 < lo < hi and points >= 2")
    return np.logspace(np.log10(lo), np.log10(hi), points)


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get(THREAD_ENV_VAR, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class FrfResult:
    """Complex transfer matrices H[k] = H(j omegas[k]) for one parameter sample."""

    omegas: np.ndarray
    H: np.ndarray               # (n_omega, p, m) complex
    sample: ParameterSample
    system_tag: str             # "full" | "reduced"

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float)
        H = np.asarray(self.H)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "H", H)
        if omegas.ndim != 1 or H.shape[0] != omegas.size:
            raise ValueError("one transfer matrix per grid point required")
        if omegas.size == 0:
            raise ValueError("grid must be nonempty")
        if np.any(np.diff(omegas) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(H)):
            raise NumericalError("non-finite transfer function values")

    def pair(self, out_idx: int, in_idx: int) -> np.ndarray:
        return self.H[:, out_idx, in_idx]


def _solve_points_sparse(E, A_d, Beff, C, omegas, method: str):
    p, m = C.shape[0], Beff.shape[1]
    H = np.empty((omegas.size, p, m), dtype=complex)
    failures = []

    precond = None
    if method == "iterative":
        # one factorization at the geometric-mean shift, reused as preconditioner
        w_mid = float(np.exp(np.mean(np.log(omegas)))) if np.all(omegas > 0) else float(np.mean(omegas))
        precond = spla.splu((1j * w_mid * E - A_d).tocsc())

    def solve_one(k: int):
        w = omegas[k]
        M = (1j * w * E - A_d).tocsc()
        try:
            if method == "direct" or precond is None:
                X = spla.splu(M).solve(Beff.astype(complex))
            else:
                X = np.empty((E.shape[0], m), dtype=complex)
                op = spla.LinearOperator(M.shape, matvec=lambda v: M @ v, dtype=complex)
                pre = spla.LinearOperator(M.shape, matvec=precond.solve, dtype=complex)
                for j in range(m):
                    x, info = spla.gmres(op, Beff[:, j].astype(complex), M=pre,
                                         rtol=1e-12, atol=0.0, maxiter=200)
                    if info != 0:
                        raise RuntimeError(f"gmres stalled (info={info})")
                    X[:, j] = x
        except RuntimeError as exc:
            failures.append((w, str(exc)))
            return np.full((p, m), np.nan, dtype=complex)
        out = C @ X
        if not np.all(np.isfinite(out)):
            failures.append((w, "non-finite solution"))
        return out

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_one, range(omegas.size)))
        for k, Hk in enumerate(results):
            H[k] = Hk
    else:
        for k in range(omegas.size):
            H[k] = solve_one(k)
    if failures:
        detail = "; ".join(f"omega={w:g}: {msg}" for w, msg in failures[:5])
        raise NumericalError(f"singular FRF solve at {len(failures)} grid point(s): {detail}")
    return H


def _solve_points_dense(E, A_d, Beff, C, omegas):
    p, m = C.shape[0], Beff.shape[1]
    H = np.empty((omegas.size, p, m), dtype=complex)
    for k, w in enumerate(omegas):
        M = 1j * w * E - A_d
        try:
            X = np.linalg.solve(M, Beff.astype(complex))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular FRF solve at omega={w:g}: {exc}") from exc
        H[k] = C @ X
    return H


def frf(system: ThermalSystem | ReducedModel, omegas, sample: ParameterSample,
        method: str = "direct") -> FrfResult:
    """Evaluate the transfer matrix on a frequency grid.

    ``method`` selects the full-system solver path: "direct" factorizes each
    shifted matrix independently, "iterative" reuses one mid-grid
    factorization as a GMRES preconditioner (validated against the direct
    path; an optimization, not the default).
    """
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size == 0:
        raise ValueError("grid must be nonempty")
    if method not in ("direct", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    if isinstance(system, ReducedModel):
        H = _solve_points_dense(system.E, system.operator(sample),
                                system.effective_input(sample), system.C, omegas)
        tag = "reduced"
    else:
        H = _solve_points_sparse(system.E, system.operator(sample),
                                 system.effective_input(sample), system.C, omegas, method)
        tag = "full"
    return FrfResult(omegas=omegas, H=H, sample=sample, system_tag=tag)


@dataclass(frozen=True)
class ErrorCurves:
    """Relative-error FRFs e_ij = (h_ij - h~_ij)/h_ij per requested pair.

    The reported value is the complex modulus.  Points where |h_ij| falls
    below the floor are undefined: stored as NaN and excluded from maxima.
    """

    omegas: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    values: np.ndarray          # (n_pairs, n_omega) complex ratios
    undefined: np.ndarray       # boolean mask, same shape

    def magnitude(self, pair: tuple[int, int]) -> np.ndarray:
        i = self.pairs.index(tuple(pair))
        mag = np.abs(self.values[i]).astype(float)
        mag[self.undefined[i]] = np.nan
        return mag

    def max_error(self, omega_limit: float | None = None) -> float:
        sel = np.ones_like(self.omegas, dtype=bool)
        if omega_limit is not None:
            sel = self.omegas <= omega_limit
        mags = np.abs(self.values[:, sel])
        mags = mags[~self.undefined[:, sel]]
        return float(mags.max()) if mags.size else 0.0

    @property
    def undefined_count(self) -> int:
        return int(self.undefined.sum())


def relative_error_frf(full: FrfResult, reduced: FrfResult, pairs) -> ErrorCurves:
    """Pointwise relative error between two FRFs on identical grids and samples."""
    if full.omegas.shape != reduced.omegas.shape or np.any(full.omegas != reduced.omegas):
        raise ValueError("FRFs must share the frequency grid")
    if full.sample != reduced.sample:
        raise ValueError("FRFs must share the parameter sample")
    pairs = tuple((int(i), int(j)) for i, j in pairs)
    values = np.empty((len(pairs), full.omegas.size), dtype=complex)
    undefined = np.zeros((len(pairs), full.omegas.size), dtype=bool)
    for row, (i, j) in enumerate(pairs):
        h = full.pair(i, j)
        ht = reduced.pair(i, j)
        small = np.abs(h) < UNDEFINED_FLOOR
        undefined[row] = small
        safe = np.where(small, 1.0, h)
        values[row] = (h - ht) / safe
        values[row][small] = np.nan
    return ErrorCurves(omegas=full.omegas, pairs=pairs, values=values, undefined=undefined)


@dataclass(frozen=True)
class EigenComparison:
    """Sorted-order pairing of full and reduced pencil eigenvalues."""

    full_values: np.ndarray
    reduced_values: np.ndarray
    relative_errors: np.ndarray

    @property
    def max_error(self) -> float:
        return float(self.relative_errors.max()) if self.relative_errors.size else 0.0


def _nonzero_sorted(vals: np.ndarray, floor: float) -> np.ndarray:
    vals = vals[np.argsort(np.abs(vals), kind="stable")]
    return vals[np.abs(vals) > floor]


def compare_eigenvalues(full: ThermalSystem, reduced: ReducedModel,
                        sample: ParameterSample, k: int) -> EigenComparison:
    """Match the first k nonzero eigenvalues of reduced vs full pencil.

    Both spectra are sorted by magnitude; eigenvalues below a relative floor
    (the conduction nullspace) are dropped before pairing.
    """
    import scipy.linalg as dla

    from .modal import pencil_eigenpairs

    if k < 1:
        raise ValueError("k must be >= 1")
    if k > reduced.r:
        raise ValueError(f"k={k} exceeds reduced dimension r={reduced.r}")
    A_d = full.operator(sample)
    # full side: smallest-magnitude eigenvalues, a margin beyond k to survive
    # the nonzero filtering
    k_full = min(full.n, k + 4)
    full_vals, _ = pencil_eigenpairs(A_d, full.E, k_full)
    red_vals = dla.eigh(reduced.operator(sample), reduced.E, eigvals_only=True)
    scale = max(np.abs(full_vals).max(), np.abs(red_vals).max(), 1e-300)
    floor = 1e-12 * scale
    full_nz = _nonzero_sorted(full_vals, floor)
    red_nz = _nonzero_sorted(red_vals, floor)
    if len(full_nz) < k or len(red_nz) < k:
        raise NumericalError(f"fewer than k={k} nonzero eigenvalues available "
                             f"(full {len(full_nz)}, reduced {len(red_nz)})")
    f, r = full_nz[:k], red_nz[:k]
    return EigenComparison(full_values=f, reduced_values=r,
                           relative_errors=np.abs((r - f) / f))


def thermo_mech_frf(thermal, mech, omegas, sample: ParameterSample,
                    input_cols=None) -> FrfResult:
    """Displacement-output FRF of the coupled chain.

    Full chain: y(j omega) = C_mech K^{-1} K_th (j omega E - A_d)^{-1} B_eff.
    Reduced chain uses the projected quantities throughout.  Accepts either
    (ThermalSystem, MechanicalSystem) or (ReducedModel, ReducedMechanicalModel).
    The reference-temperature offset is a constant operating point and does
    not enter the transfer function.
    """
    from .mechanical import ReducedMechanicalModel

    omegas = np.asarray(omegas, dtype=float)
    thermal_frf_needed_cols = input_cols
    if isinstance(thermal, ReducedModel) != isinstance(mech, ReducedMechanicalModel):
        raise ValueError("thermal and mechanical models must both be full or both reduced")
    reduced_side = isinstance(thermal, ReducedModel)

    Beff = thermal.effective_input(sample)
    if thermal_frf_needed_cols is not None:
        Beff = Beff[:, list(thermal_frf_needed_cols)]
    A_d = thermal.operator(sample)
    E = thermal.E

    if reduced_side:
        import scipy.linalg as dla

        lu_K = dla.lu_factor(mech.K)
        coupling = mech.coupling
        C_m = mech.C
        H = np.empty((omegas.size, C_m.shape[0], Beff.shape[1]), dtype=complex)
        for kk, w in enumerate(omegas):
            X = np.linalg.solve(1j * w * E - A_d, Beff.astype(complex))
            load = coupling @ X
            U = dla.lu_solve(lu_K, load)
            H[kk] = C_m @ U
    else:
        lu_K = spla.splu(mech.K.tocsc())
        K_th = mech.K_th
        C_m = mech.C
        H = np.empty((omegas.size, C_m.shape[0], Beff.shape[1]), dtype=complex)
        for kk, w in enumerate(omegas):
            M = (1j * w * E - A_d).tocsc()
            try:
                X = spla.splu(M).solve(Beff.astype(complex))
            except RuntimeError as exc:
                raise NumericalError(f"singular FRF solve at omega={w:g}: {exc}") from exc
            load = K_th @ X
            U = lu_K.solve(load.real) + 1j * lu_K.solve(load.imag)
            H[kk] = C_m @ U
    tag = "reduced" if reduced_side else "full"
    return FrfResult(omegas=omegas, H=H, sample=sample, system_tag=tag)
