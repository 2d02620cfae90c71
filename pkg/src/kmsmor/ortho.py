"""Deterministic orthonormalization: repeated modified Gram-Schmidt with deflation."""
from __future__ import annotations

import numpy as np

#: relative drop tolerance below which a candidate column is deflated
DROP_TOL = 1e-10


def orthonormalize(block: np.ndarray, against: np.ndarray | None = None,
                   drop_tol: float = DROP_TOL) -> tuple[np.ndarray, list[int]]:
    """Orthonormalize the columns of ``block``; two MGS passes per column.

    Columns are processed left to right; each is orthogonalized against
    ``against`` (assumed orthonormal) and the columns kept so far, twice.
    A column whose remainder falls below ``drop_tol`` times its original
    norm is deflated.  Returns the kept orthonormal columns and the indices
    (into ``block``) of the survivors, making rank decisions reproducible.
    """
    block = np.atleast_2d(np.asarray(block, dtype=float))
    n = block.shape[0]
    kept: list[np.ndarray] = []
    kept_idx: list[int] = []
    for j in range(block.shape[1]):
        v = block[:, j].copy()
        norm0 = np.linalg.norm(v)
        if norm0 == 0.0:
            continue
        for _ in range(2):
            if against is not None and against.shape[1]:
                v -= against @ (against.T @ v)
            for q in kept:
                v -= q * (q @ v)
        nv = np.linalg.norm(v)
        if nv <= drop_tol * norm0:
            continue
        kept.append(v / nv)
        kept_idx.append(j)
    if not kept:
        return np.zeros((n, 0)), []
    return np.column_stack(kept), kept_idx


def orthonormality_defect(V: np.ndarray) -> float:
    """max |V^T V - I|, the orthonormality residual of a column basis."""
    if V.shape[1] == 0:
        return 0.0
    G = V.T @ V
    return float(np.abs(G - np.eye(G.shape[0])).max())
