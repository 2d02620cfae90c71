"""Truncated modal basis of the thermal pencil (A_d, E).

Eigenpairs with |alpha| <= omega_m are extracted with a shift-invert
spectral transformation at a tiny positive shift (the conduction nullspace
sits at alpha = 0, so any sigma > 0 keeps A_d - sigma E nonsingular with
this sign convention) and a Lanczos-type iteration (ARPACK).  Small systems
fall back to a dense solve.  Every returned eigenpair carries a verified
residual; pairs that fail the certificate are polished by inverse iteration.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as dla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError
from .systems import ParameterSample, ThermalSystem

#: relative residual certificate for accepted eigenpairs
RESIDUAL_RTOL = 1e-8
#: dimension below which the dense path is used unconditionally
DENSE_CUTOFF = 600


def _is_diagonal(M: sp.spmatrix) -> bool:
    off = M - sp.diags(M.diagonal())
    return off.nnz == 0


def _residuals(A_d, E, alphas, vecs) -> np.ndarray:
    """Relative eigen residuals with an absolute floor for the nullspace.

    For the conduction nullspace A_d phi is itself roundoff, so the pure
    relative test |A phi - a E phi| <= rtol |A phi| is unusable there; the
    floor 1e-10 |A|_max ||phi|| covers it without masking real failures.
    """
    amax = abs(A_d).max() if A_d.nnz else 0.0
    out = np.empty(len(alphas))
    for i, a in enumerate(alphas):
        phi = vecs[:, i]
        r = np.linalg.norm(A_d @ phi - a * (E @ phi))
        scale = RESIDUAL_RTOL * np.linalg.norm(A_d @ phi) + 1e-10 * amax * np.linalg.norm(phi)
        out[i] = r / max(scale, 1e-300)
    return out


def _dense_pencil_eigs(A_d, E, diag_E: bool):
    if diag_E:
        s = 1.0 / np.sqrt(E.diagonal())
        S = (A_d.multiply(s[:, None])).multiply(s[None, :]).toarray()
        S = 0.5 * (S + S.T)
        w, Psi = np.linalg.eigh(S)
        Phi = s[:, None] * Psi          # E-orthonormal by construction
    else:
        w, Phi = dla.eigh(A_d.toarray(), E.toarray())
    order = np.argsort(np.abs(w), kind="stable")
    return w[order], Phi[:, order]


def _arpack_pencil_eigs(A_d, E, k: int):
    n = A_d.shape[0]
    amax = abs(A_d).max() if A_d.nnz else 1.0
    sigma = 1e-12 * amax
    v0 = np.full(n, 1.0 / np.sqrt(n))   # deterministic start vector
    try:
        w, Phi = spla.eigsh(A_d, k=k, M=E, sigma=sigma, which="LM", v0=v0,
                            ncv=min(n, max(2 * k + 1, 40)))
    except RuntimeError as exc:
        raise NumericalError(f"shift-invert factorization failed: {exc}") from exc
    except spla.ArpackNoConvergence as exc:
        raise NumericalError(f"Lanczos iteration did not converge: {exc}") from exc
    order = np.argsort(np.abs(w), kind="stable")
    return w[order], Phi[:, order]


def _polish(A_d, E, alphas, vecs, bad: np.ndarray) -> None:
    """One inverse-iteration step per failing pair, in place."""
    for i in np.where(bad)[0]:
        a = alphas[i]
        shift = a * (1.0 + 1e-8) + np.sign(a or 1.0) * 1e-14 * abs(A_d).max()
        try:
            lu = spla.splu((A_d - shift * E).tocsc())
            z = lu.solve(E @ vecs[:, i])
        except RuntimeError:
            continue
        nz = np.linalg.norm(z)
        if not np.isfinite(nz) or nz == 0:
            continue
        z /= np.sqrt(z @ (E @ z))
        vecs[:, i] = z
        alphas[i] = (z @ (A_d @ z)) / (z @ (E @ z))


def pencil_eigenpairs(A_d: sp.spmatrix, E: sp.spmatrix, k: int,
                      method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """k smallest-magnitude eigenpairs of A_d phi = alpha E phi.

    Eigenvalues ascend in magnitude; eigenvectors are E-orthonormal.
    """
    n = A_d.shape[0]
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds pencil dimension n={n}")
    A_d = sp.csc_matrix(A_d)
    E = sp.csc_matrix(E)
    diag_E = _is_diagonal(E)
    use_dense = method == "dense" or (method == "auto" and (n <= DENSE_CUTOFF or k >= n - 2))
    if method == "lanczos" and k >= n - 1:
        raise NumericalError("lanczos path requires k < n - 1; use the dense method")
    if use_dense:
        w, Phi = _dense_pencil_eigs(A_d, E, diag_E)
        w, Phi = w[:k].copy(), Phi[:, :k].copy()
    else:
        w, Phi = _arpack_pencil_eigs(A_d, E, k)

    bad = _residuals(A_d, E, w, Phi) > 1.0
    if bad.any():
        _polish(A_d, E, w, Phi, bad)
        bad = _residuals(A_d, E, w, Phi) > 1.0
        if bad.any():
            worst = int(np.argmax(_residuals(A_d, E, w, Phi)))
            raise NumericalError(
                f"eigen residual certificate failed for {bad.sum()} pair(s); "
                f"worst at alpha={w[worst]:.6e}")
    return w, Phi


def compute_modal_basis(system: ThermalSystem, omega_m: float,
                        htc_at_assembly: ParameterSample | None = None, *,
                        max_modes: int = 500,
                        method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs of (A + sum h_i D_i, E) with |alpha| <= omega_m.

    The default sample is all-zero HTC, matching the first bilinearization
    step; pass ``htc_at_assembly`` to build modes of a grounded system.
    Returned eigenvectors are E-orthonormal and sorted by |alpha| ascending
    (cutoff inclusive).  Raises NumericalError when the cutoff would capture
    more than ``max_modes`` eigenpairs rather than silently truncating.

    Returns
    -------
    (Phi, alphas) : (n, mu) ndarray and (mu,) ndarray
    """
    if omega_m <= 0:
        raise ValueError("omega_m must be positive")
    sample = htc_at_assembly if htc_at_assembly is not None else ParameterSample.zeros(system.n_c)
    A_d = system.operator(sample)
    n = system.n

    k = min(n, 32)
    while True:
        w, Phi = pencil_eigenpairs(A_d, system.E, k, method=method)
        covered = np.abs(w[-1]) > omega_m
        inside = int(np.sum(np.abs(w) <= omega_m))
        if inside > max_modes:
            raise NumericalError(
                f"modal cutoff omega_m={omega_m:g} captures more than max_modes="
                f"{max_modes} eigenpairs ({inside}+ found)")
        if covered or k >= n:
            break
        k = min(n, 2 * k)
    sel = np.abs(w) <= omega_m
    return Phi[:, sel].copy(), w[sel].copy()
