"""A-priori error estimator for the KMS reduction and its inversion.

The collocated reduction error magnitude is bounded by

    e_est(omega) = (omega^2 + s_e^2) / (omega^2 + omega_m^2)

for a one-moment Krylov block at expansion point s_e and a modal cutoff
omega_m above the frequency range of interest.  Inverting the bound at
omega_max yields the smallest cutoff meeting a target tolerance.  The bound
is certified for collocated input/output pairs only; empirically it tends
to hold elsewhere, and bound_check reports rather than fails on exceedances.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .reduction import ReducedModel
from .systems import ParameterSample, ThermalSystem


@dataclass(frozen=True)
class ErrorBudget:
    """Target tolerance and frequency range driving the modal cutoff choice."""

    epsilon: float      # relative error tolerance, 0 < eps < 1
    omega_max: float    # top of frequency range of interest, rad/s
    s_e: float          # expansion point, rad/s
    omega_m: float      # resulting modal cutoff, rad/s

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.s_e < self.omega_max:
            raise ValueError("need 0 < s_e < omega_max")
        if self.omega_m <= self.omega_max:
            raise ValueError("omega_m must exceed omega_max")

    @classmethod
    def from_tolerance(cls, epsilon: float, omega_max: float, s_e: float) -> "ErrorBudget":
        return cls(epsilon=epsilon, omega_max=omega_max, s_e=s_e,
                   omega_m=select_cutoff(epsilon, omega_max, s_e))


def estimator(omega, s_e: float, omega_m: float):
    """Error-bound magnitude (omega^2 + s_e^2) / (omega^2 + omega_m^2).

    Monotonically increasing in omega for omega_m > s_e, with range
    [s_e^2/omega_m^2, 1).  Accepts scalars or arrays.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("omega must be nonnegative")
    out = (omega**2 + s_e**2) / (omega**2 + omega_m**2)
    return float(out) if out.ndim == 0 else out


def select_cutoff(epsilon: float, omega_max: float, s_e: float) -> float:
    """Smallest modal cutoff making the bound equal epsilon at omega_max.

    Closed-form inversion: omega_m = sqrt((omega_max^2 + s_e^2)/eps - omega_max^2).
    For epsilon >= 1 no modes are needed; omega_max is returned with a warning.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if omega_max <= 0 or s_e <= 0:
        raise ValueError("omega_max and s_e must be positive")
    if s_e >= omega_max:
        raise ValueError("need s_e < omega_max")
    if epsilon >= 1:
        warnings.warn("epsilon >= 1 requires no modal content; returning omega_max")
        return float(omega_max)
    return float(np.sqrt((omega_max**2 + s_e**2) / epsilon - omega_max**2))


@dataclass(frozen=True)
class BoundReport:
    """Measured error FRFs against the estimator, one row block per io pair."""

    omegas: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    errors: np.ndarray          # (n_pairs, n_omega) magnitudes, NaN where undefined
    estimate: np.ndarray        # (n_omega,)
    sample: ParameterSample
    s_e: float
    omega_m: float

    @property
    def margins(self) -> np.ndarray:
        """estimate - error per pair and frequency (NaN where undefined)."""
        return self.estimate[None, :] - self.errors

    @property
    def exceedances(self) -> list[tuple[tuple[int, int], float, float, float]]:
        """(pair, omega, error, estimate) wherever the bound is violated."""
        out = []
        for p, row in zip(self.pairs, self.errors):
            mask = np.isfinite(row) & (row > self.estimate)
            for k in np.where(mask)[0]:
                out.append((p, float(self.omegas[k]), float(row[k]), float(self.estimate[k])))
        return out

    def max_error(self, omega_limit: float | None = None) -> float:
        """Largest finite error, optionally restricted to omega <= omega_limit."""
        sel = np.ones_like(self.omegas, dtype=bool)
        if omega_limit is not None:
            sel = self.omegas <= omega_limit
        vals = self.errors[:, sel]
        vals = vals[np.isfinite(vals)]
        return float(vals.max()) if vals.size else 0.0

    def pair_rows(self, pair: tuple[int, int]):
        """(omega, error, estimate, margin) rows for one pair, CSV-ready."""
        i = self.pairs.index(pair)
        err = self.errors[i]
        return np.column_stack([self.omegas, err, self.estimate, self.estimate - err])


def bound_check(full: ThermalSystem, reduced: ReducedModel, grid: np.ndarray,
                io_pairs, sample: ParameterSample) -> BoundReport:
    """Measure |e_ij(j omega)| on the grid and compare with the estimator.

    Exceedances are findings recorded in the report, not failures; the bound
    is proven only for collocated pairs (identical input and output), so
    callers should treat non-collocated exceedances as expected.
    """
    from .analysis import frf, relative_error_frf

    grid = np.asarray(grid, dtype=float)
    pairs = tuple((int(i), int(j)) for i, j in io_pairs)
    full_frf = frf(full, grid, sample)
    red_frf = frf(reduced, grid, sample)
    curves = relative_error_frf(full_frf, red_frf, pairs)
    est = estimator(grid, reduced.basis.s_e, reduced.basis.omega_m)
    errors = np.vstack([curves.magnitude(p) for p in pairs])
    return BoundReport(omegas=grid, pairs=pairs, errors=errors, estimate=est,
                       sample=sample, s_e=reduced.basis.s_e, omega_m=reduced.basis.omega_m)
