"""Finite element assembly of desk-scale thermal and mechanical systems.

Structured meshes only: a 1D rod of linear elements, a 2D plate of bilinear
quadrilaterals (thermal only), and a 3D box of trilinear hexahedra with a
matching linear-elastic mechanical model.  Conduction and capacity use exact
tensor-product integration; elasticity and thermal-stress coupling use 2x2x2
Gauss quadrature, which is exact on the rectilinear elements used here.

Sign convention: the assembled A and D_i are negative semi-definite, so the
pencil (A + sum h_i D_i, E) has real nonpositive eigenvalues.  Capacity is
lumped (row-sum) by default, which keeps E diagonal and trivially positive
definite; a consistent capacity matrix is available as an option.

Dirichlet-style thermal grounding is expressed as a large-HTC convective
patch, keeping every system in the single affine parametric form.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, ModelValidationError
from .grids import BoxGrid, PlateGrid
from .systems import (AMBIENT_PREFIX, AXES, FLUX_PREFIX, BoundaryPatch,
                      MaterialConfig, MechanicalSystem, ThermalSystem)


def _k1d(h: float) -> np.ndarray:
    return (1.0 / h) * np.array([[1.0, -1.0], [-1.0, 1.0]])


def _m1d(h: float) -> np.ndarray:
    return (h / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]])


def _scatter(conn: np.ndarray, Ke: np.ndarray, n: int) -> sp.csc_matrix:
    """Accumulate one identical symmetric element matrix over all elements.

    The result is symmetrized bit-exactly: Gauss-quadrature element matrices
    and duplicate summation can leave ulp-level asymmetry, and the system
    containers promise |M - M^T|_max = 0.
    """
    m = conn.shape[1]
    rows = np.repeat(conn, m, axis=1).ravel()
    cols = np.tile(conn, (1, m)).ravel()
    vals = np.tile(Ke.ravel(), conn.shape[0])
    S = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()
    return (0.5 * (S + S.T)).tocsc()


def _split_patches(patches: Sequence[BoundaryPatch]):
    conv = [p for p in patches if p.kind == "convective"]
    flux = [p for p in patches if p.kind == "heat_flux"]
    fixed = [p for p in patches if p.kind == "fixed_displacement"]
    return conv, flux, fixed


def _check_disjoint_convection(conv: Sequence[BoundaryPatch],
                               node_measures: list[np.ndarray]) -> None:
    for i in range(len(conv)):
        for j in range(i + 1, len(conv)):
            if np.any((node_measures[i] != 0) & (node_measures[j] != 0)):
                raise ModelValidationError(
                    conv[i].name, "disjoint convective patches",
                    f"patches {conv[i].name!r} and {conv[j].name!r} share nodes")


def _build_channels(n: int, conv, conv_measures, flux, flux_measures):
    """Convection matrices plus input channels (flux first, then ambient)."""
    D = tuple(sp.diags(-m, format="csc") for m in conv_measures)
    cols, labels = [], []
    for p, m in zip(flux, flux_measures):
        cols.append(m)
        labels.append(FLUX_PREFIX + p.name)
    for p, m in zip(conv, conv_measures):
        cols.append(m)
        labels.append(AMBIENT_PREFIX + p.name)
    B = np.column_stack(cols) if cols else np.zeros((n, 0))
    return D, B, tuple(labels)


def _thermal_outputs(B: np.ndarray, collocated: bool, output_nodes: Sequence[int], n: int):
    if collocated:
        if output_nodes:
            raise ConfigError("collocated outputs and explicit output nodes are exclusive")
        return B.T.copy()
    C = np.zeros((len(output_nodes), n))
    for i, q in enumerate(output_nodes):
        C[i, int(q)] = 1.0
    return C


def _patch_measure(p: BoundaryPatch, facet_nodes, facet_measure, n: int) -> np.ndarray:
    """Lump w(z)-weighted facet measures onto nodes."""
    m = np.zeros(n)
    seen = set()
    for fid, w in zip(p.facet_ids, p.weight_per_facet):
        if fid in seen:
            raise ModelValidationError(p.name, "unique facets", f"facet {fid} repeated")
        seen.add(fid)
        nodes = facet_nodes(fid)
        share = w * facet_measure(fid) / len(nodes)
        m[nodes] += share
    if not m.any():
        raise ModelValidationError(p.name, "nonzero measure", "zero-measure patch")
    return m


def assemble_rod_1d(num_elements: int, length: float, material: MaterialConfig,
                    patches: Sequence[BoundaryPatch], *, cross_section: float = 1.0,
                    lumped_capacity: bool = True, collocated_outputs: bool = True,
                    output_nodes: Sequence[int] = ()) -> ThermalSystem:
    """Assemble a 1D conduction rod with convective/flux node patches.

    Facet ids are node indices (0 .. num_elements); a facet's measure is its
    patch weight, so endpoint patches with weight 1 model unit-area tips and
    interior patches model fin-type lateral exchange with w carrying the
    exchange surface per node.

    Parameters
    ----------
    num_elements : int
        Number of linear elements (>= 2).
    length : float
        Rod length in m.
    material : MaterialConfig
    patches : sequence of BoundaryPatch
        Convective and heat_flux patches; fixed_displacement is rejected.
    cross_section : float
        Conduction cross-section area in m^2.
    """
    if num_elements < 2:
        raise ConfigError("num_elements must be >= 2")
    if length <= 0 or cross_section <= 0:
        raise ConfigError("length and cross_section must be positive")
    n = num_elements + 1
    h = length / num_elements

    conv, flux, fixed = _split_patches(patches)
    if fixed:
        raise ConfigError("fixed_displacement patches are not valid on a thermal rod")
    for p in conv + flux:
        if any(not 0 <= f < n for f in p.facet_ids):
            raise ConfigError(f"patch {p.name!r}: facet ids must be node indices 0..{n - 1}")

    conn = np.column_stack([np.arange(num_elements), np.arange(1, num_elements + 1)])
    A = -_scatter(conn, material.conductivity * cross_section * _k1d(h), n)
    Me = material.density * material.heat_capacity * cross_section * _m1d(h)
    if lumped_capacity:
        lumped = np.zeros(n)
        np.add.at(lumped, conn.ravel(), np.tile(Me.sum(axis=1), num_elements))
        E = sp.diags(lumped, format="csc")
    else:
        E = _scatter(conn, Me, n)

    def facet_nodes(fid):
        return np.array([fid])

    def facet_measure(fid):
        return 1.0

    conv_m = [_patch_measure(p, facet_nodes, facet_measure, n) for p in conv]
    flux_m = [_patch_measure(p, facet_nodes, facet_measure, n) for p in flux]
    _check_disjoint_convection(conv, conv_m)
    D, B, labels = _build_channels(n, conv, conv_m, flux, flux_m)
    C = _thermal_outputs(B, collocated_outputs, output_nodes, n)
    return ThermalSystem(E=E, A=A, D=D, B=B, C=C,
                         patch_names=tuple(p.name for p in conv), input_labels=labels)


def assemble_plate_2d(nx: int, ny: int, dims: tuple[float, float], material: MaterialConfig,
                      patches: Sequence[BoundaryPatch], *, thickness: float = 1.0,
                      lumped_capacity: bool = True, collocated_outputs: bool = True,
                      output_nodes: Sequence[int] = ()) -> ThermalSystem:
    """Assemble a 2D plate of bilinear quads (thermal only).

    Boundary facets are the edges enumerated by PlateGrid; convection acts on
    the lateral edges with measure thickness * edge length.
    """
    if nx < 2 or ny < 2:
        raise ConfigError("nx and ny must be >= 2")
    grid = PlateGrid(nx, ny, *dims)
    hx, hy = grid.spacing
    n = grid.n_nodes

    conv, flux, fixed = _split_patches(patches)
    if fixed:
        raise ConfigError("fixed_displacement patches are not valid on a thermal plate")
    for p in conv + flux:
        if any(not 0 <= f < grid.n_facets for f in p.facet_ids):
            raise ConfigError(f"patch {p.name!r}: facet ids must be edge ids 0..{grid.n_facets - 1}")

    kx, ky = _k1d(hx), _k1d(hy)
    mx, my = _m1d(hx), _m1d(hy)
    Ke = thickness * material.conductivity * (np.kron(kx, my) + np.kron(mx, ky))
    Me = thickness * material.density * material.heat_capacity * np.kron(mx, my)
    conn = grid.element_connectivity()
    A = -_scatter(conn, Ke, n)
    if lumped_capacity:
        lumped = np.zeros(n)
        np.add.at(lumped, conn.ravel(), np.tile(Me.sum(axis=1), conn.shape[0]))
        E = sp.diags(lumped, format="csc")
    else:
        E = _scatter(conn, Me, n)

    def facet_nodes(fid):
        return grid.facet_nodes_and_length(fid)[0]

    def facet_measure(fid):
        return thickness * grid.facet_nodes_and_length(fid)[1]

    conv_m = [_patch_measure(p, facet_nodes, facet_measure, n) for p in conv]
    flux_m = [_patch_measure(p, facet_nodes, facet_measure, n) for p in flux]
    _check_disjoint_convection(conv, conv_m)
    D, B, labels = _build_channels(n, conv, conv_m, flux, flux_m)
    C = _thermal_outputs(B, collocated_outputs, output_nodes, n)
    return ThermalSystem(E=E, A=A, D=D, B=B, C=C,
                         patch_names=tuple(p.name for p in conv), input_labels=labels)


def _hex_element_matrices(hx: float, hy: float, hz: float, material: MaterialConfig):
    """Elastic stiffness (24x24) and thermal coupling (24x8) of one hex element."""
    E_y, nu = material.young_modulus, material.poisson
    lam_l = E_y * nu / ((1 + nu) * (1 - 2 * nu))
    mu_l = E_y / (2 * (1 + nu))
    Cmat = np.zeros((6, 6))
    Cmat[:3, :3] = lam_l
    Cmat[np.arange(3), np.arange(3)] += 2 * mu_l
    Cmat[3:, 3:] = mu_l * np.eye(3)
    beta = E_y * material.expansion / (1 - 2 * nu)
    m_voigt = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])

    corners = [(2 * a - 1, 2 * b - 1, 2 * c - 1) for a in (0, 1) for b in (0, 1) for c in (0, 1)]
    g = 1.0 / np.sqrt(3.0)
    det_j = hx * hy * hz / 8.0
    Ke = np.zeros((24, 24))
    Kth_e = np.zeros((24, 8))
    for xi in (-g, g):
        for eta in (-g, g):
            for zeta in (-g, g):
                N = np.array([(1 + cx * xi) * (1 + cy * eta) * (1 + cz * zeta) / 8
                              for (cx, cy, cz) in corners])
                dN = np.array([[cx * (1 + cy * eta) * (1 + cz * zeta) / 8 * (2 / hx),
                                cy * (1 + cx * xi) * (1 + cz * zeta) / 8 * (2 / hy),
                                cz * (1 + cx * xi) * (1 + cy * eta) / 8 * (2 / hz)]
                               for (cx, cy, cz) in corners])
                Bm = np.zeros((6, 24))
                for a in range(8):
                    bx, by, bz = dN[a]
                    Bm[0, 3 * a] = bx
                    Bm[1, 3 * a + 1] = by
                    Bm[2, 3 * a + 2] = bz
                    Bm[3, 3 * a] = by
                    Bm[3, 3 * a + 1] = bx
                    Bm[4, 3 * a + 1] = bz
                    Bm[4, 3 * a + 2] = by
                    Bm[5, 3 * a] = bz
                    Bm[5, 3 * a + 2] = bx
                Ke += (Bm.T @ Cmat @ Bm) * det_j
                Kth_e += np.outer(Bm.T @ m_voigt, beta * N) * det_j
    return Ke, Kth_e


def _resolve_constraints(grid: BoxGrid, fixed_patches: Sequence[BoundaryPatch], n_full: int):
    """Dofs to eliminate and penalty springs from fixed_displacement patches."""
    eliminate = np.zeros(n_full, dtype=bool)
    springs = np.zeros(n_full)
    for p in fixed_patches:
        nodes = set()
        for fid in p.facet_ids:
            fn, _ = grid.facet_nodes_and_area(fid)
            nodes.update(int(q) for q in fn)
        dirs = [AXES.index(d) for d in p.directions]
        for q in sorted(nodes):
            for d in dirs:
                dof = 3 * q + d
                if p.spring_stiffness is None:
                    eliminate[dof] = True
                else:
                    springs[dof] += p.spring_stiffness
    return eliminate, springs


def assemble_box_3d(nx: int, ny: int, nz: int, dims: tuple[float, float, float],
                    material: MaterialConfig, patches: Sequence[BoundaryPatch], *,
                    lumped_capacity: bool = True, collocated_outputs: bool = True,
                    output_nodes: Sequence[int] = (),
                    mech_outputs: Sequence[tuple[int, str]] = (),
                    external_forces: Sequence[tuple[int, str]] = (),
                    x_ref: np.ndarray | None = None,
                    ) -> tuple[ThermalSystem, MechanicalSystem]:
    """Assemble coupled thermal/mechanical systems on a structured hex box.

    Thermal boundary facets are the box faces enumerated by BoxGrid (see
    grids module).  fixed_displacement patches constrain the mechanical
    model: dofs are eliminated by row/column deletion when the patch has no
    spring stiffness, otherwise penalty springs are added at the patch nodes.

    Parameters
    ----------
    nx, ny, nz : int
        Elements per direction (>= 2 each).
    dims : (lx, ly, lz)
        Box edge lengths in m.
    mech_outputs, external_forces : sequence of (node_id, axis)
        Displacement probes (rows of C) and unit point-force inputs
        (columns of B_ext); axis is one of "x", "y", "z".
    x_ref : ndarray, optional
        Reference temperature vector; defaults to T_ref at every node.
    """
    if min(nx, ny, nz) < 2:
        raise ConfigError("nx, ny, nz must be >= 2")
    grid = BoxGrid(nx, ny, nz, *dims)
    hx, hy, hz = grid.spacing
    n = grid.n_nodes
    conn = grid.element_connectivity()

    conv, flux, fixed = _split_patches(patches)
    for p in conv + flux + fixed:
        if any(not 0 <= f < grid.n_facets for f in p.facet_ids):
            raise ConfigError(f"patch {p.name!r}: facet ids must be face ids 0..{grid.n_facets - 1}")

    kx, ky, kz = _k1d(hx), _k1d(hy), _k1d(hz)
    mx, my, mz = _m1d(hx), _m1d(hy), _m1d(hz)
    Ke_th = material.conductivity * (np.kron(np.kron(kx, my), mz)
                                     + np.kron(np.kron(mx, ky), mz)
                                     + np.kron(np.kron(mx, my), kz))
    Me = material.density * material.heat_capacity * np.kron(np.kron(mx, my), mz)
    A = -_scatter(conn, Ke_th, n)
    if lumped_capacity:
        lumped = np.zeros(n)
        np.add.at(lumped, conn.ravel(), np.tile(Me.sum(axis=1), conn.shape[0]))
        E = sp.diags(lumped, format="csc")
    else:
        E = _scatter(conn, Me, n)

    def facet_nodes(fid):
        return grid.facet_nodes_and_area(fid)[0]

    def facet_measure(fid):
        return grid.facet_nodes_and_area(fid)[1]

    conv_m = [_patch_measure(p, facet_nodes, facet_measure, n) for p in conv]
    flux_m = [_patch_measure(p, facet_nodes, facet_measure, n) for p in flux]
    _check_disjoint_convection(conv, conv_m)
    D, B, labels = _build_channels(n, conv, conv_m, flux, flux_m)
    C = _thermal_outputs(B, collocated_outputs, output_nodes, n)
    thermal = ThermalSystem(E=E, A=A, D=D, B=B, C=C,
                            patch_names=tuple(p.name for p in conv), input_labels=labels)

    # mechanical part
    n_full = 3 * n
    Ke_m, Kth_e = _hex_element_matrices(hx, hy, hz, material)
    dof_conn = np.empty((conn.shape[0], 24), dtype=int)
    for d in range(3):
        dof_conn[:, d::3] = 3 * conn + d
    K_full = _scatter(dof_conn, Ke_m, n_full)
    rows = np.repeat(dof_conn, 8, axis=1).ravel()
    cols = np.tile(conn, (1, 24)).ravel()
    vals = np.tile(Kth_e.ravel(), conn.shape[0])
    Kth_full = sp.coo_matrix((vals, (rows, cols)), shape=(n_full, n)).tocsc()

    if not fixed:
        raise ModelValidationError("K", "positive definiteness",
                                   "unconstrained mechanical system (K singular): "
                                   "no fixed_displacement patch given")
    eliminate, springs = _resolve_constraints(grid, fixed, n_full)
    if springs.any():
        K_full = K_full + sp.diags(springs)
    free = np.where(~eliminate)[0]
    K = K_full[np.ix_(free, free)].tocsc()
    K_th = Kth_full[free]

    full_to_free = -np.ones(n_full, dtype=int)
    full_to_free[free] = np.arange(free.size)

    def free_dof(node: int, axis: str, role: str) -> int:
        dof = full_to_free[3 * int(node) + AXES.index(axis)]
        if dof < 0:
            raise ConfigError(f"{role} at node {node} axis {axis} was eliminated by a constraint")
        return dof

    C_mech = np.zeros((len(mech_outputs), free.size))
    for i, (q, ax) in enumerate(mech_outputs):
        C_mech[i, free_dof(q, ax, "mech output")] = 1.0
    B_ext = np.zeros((free.size, len(external_forces)))
    for j, (q, ax) in enumerate(external_forces):
        B_ext[free_dof(q, ax, "external force"), j] = 1.0

    ref = np.full(n, material.reference_temperature) if x_ref is None else np.asarray(x_ref, float)
    mech = MechanicalSystem(K=K, K_th=K_th, B_ext=B_ext, C=C_mech, x_ref=ref,
                            free_dofs=free, n_full=n_full)

    # singularity probe: a structurally unconstrained K must be reported, not
    # silently factorized into garbage
    try:
        probe = spla.splu(K).solve(np.ones(free.size))
        if not np.all(np.isfinite(probe)):
            raise RuntimeError("non-finite solve")
    except RuntimeError as exc:
        raise ModelValidationError("K", "positive definiteness",
                                   f"unconstrained mechanical system (K singular): {exc}") from exc
    return thermal, mech
