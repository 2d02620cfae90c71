"""Structured-grid bookkeeping: node numbering and boundary facet enumeration.

Facet id conventions used by the assembly routines and patch definitions:

* rod:   facet i is node i (0 .. num_elements); its measure is the patch
         weight alone, so endpoint convection with weight 1 models a unit
         cross-section tip.
* plate: boundary edges, enumerated side by side in the order
         x-, x+, y-, y+ (each side runs over its transverse element index).
* box:   boundary faces, enumerated face by face in the order
         x-, x+, y-, y+, z-, z+ (row-major over the two transverse element
         indices of each face).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

BOX_FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
PLATE_SIDES = ("x-", "x+", "y-", "y+")


@dataclass(frozen=True)
class BoxGrid:
    """Node/facet numbering for an nx x ny x nz grid of hexahedral elements."""

    nx: int
    ny: int
    nz: int
    lx: float
    ly: float
    lz: float

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx + 1, self.ny + 1, self.nz + 1)

    @property
    def n_nodes(self) -> int:
        nnx, nny, nnz = self.shape
        return nnx * nny * nnz

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.lx / self.nx, self.ly / self.ny, self.lz / self.nz)

    def node_id(self, ix: int, iy: int, iz: int) -> int:
        nnx, nny, nnz = self.shape
        if not (0 <= ix < nnx and 0 <= iy < nny and 0 <= iz < nnz):
            raise ConfigError(f"node index ({ix},{iy},{iz}) outside grid {self.shape}")
        return (ix * nny + iy) * nnz + iz

    def element_connectivity(self) -> np.ndarray:
        """(n_elem, 8) node ids, local order (a,b,c) for a,b,c in {0,1}^3."""
        nnx, nny, nnz = self.shape
        ids = np.arange(self.n_nodes).reshape(nnx, nny, nnz)
        conn = np.empty((self.nx * self.ny * self.nz, 8), dtype=int)
        e = 0
        for ix in range(self.nx):
            for iy in range(self.ny):
                for iz in range(self.nz):
                    conn[e] = [ids[ix + a, iy + b, iz + c]
                               for a in (0, 1) for b in (0, 1) for c in (0, 1)]
                    e += 1
        return conn

    def _face_counts(self) -> list[int]:
        return [self.ny * self.nz, self.ny * self.nz,
                self.nx * self.nz, self.nx * self.nz,
                self.nx * self.ny, self.nx * self.ny]

    @property
    def n_facets(self) -> int:
        return sum(self._face_counts())

    def face_facets(self, face: str) -> tuple[int, ...]:
        """All facet ids of one named box face."""
        if face not in BOX_FACES:
            raise ConfigError(f"unknown box face {face!r}, expected one of {BOX_FACES}")
        counts = self._face_counts()
        k = BOX_FACES.index(face)
        start = sum(counts[:k])
        return tuple(range(start, start + counts[k]))

    def facet_nodes_and_area(self, facet_id: int) -> tuple[np.ndarray, float]:
        """Corner node ids and area of one boundary facet."""
        counts = self._face_counts()
        if not 0 <= facet_id < self.n_facets:
            raise ConfigError(f"facet id {facet_id} outside 0..{self.n_facets - 1}")
        k = 0
        local = facet_id
        while local >= counts[k]:
            local -= counts[k]
            k += 1
        face = BOX_FACES[k]
        hx, hy, hz = self.spacing
        axis = "xyz".index(face[0])
        trans = [d for d in range(3) if d != axis]
        n_t1 = (self.nx, self.ny, self.nz)[trans[1]]
        i0, i1 = divmod(local, n_t1)
        fixed = (self.nx, self.ny, self.nz)[axis] if face[1] == "+" else 0
        nodes = []
        for a in (0, 1):
            for b in (0, 1):
                idx = [0, 0, 0]
                idx[axis] = fixed
                idx[trans[0]] = i0 + a
                idx[trans[1]] = i1 + b
                nodes.append(self.node_id(*idx))
        spac = self.spacing
        area = spac[trans[0]] * spac[trans[1]]
        return np.array(nodes), area

    def face_nodes(self, face: str) -> np.ndarray:
        """Unique node ids of one named face."""
        nodes = set()
        for f in self.face_facets(face):
            nn, _ = self.facet_nodes_and_area(f)
            nodes.update(int(q) for q in nn)
        return np.array(sorted(nodes))


@dataclass(frozen=True)
class PlateGrid:
    """Node/edge numbering for an nx x ny grid of quadrilateral elements."""

    nx: int
    ny: int
    lx: float
    ly: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny + 1)

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def spacing(self) -> tuple[float, float]:
        return (self.lx / self.nx, self.ly / self.ny)

    def node_id(self, ix: int, iy: int) -> int:
        nnx, nny = self.shape
        if not (0 <= ix < nnx and 0 <= iy < nny):
            raise ConfigError(f"node index ({ix},{iy}) outside grid {self.shape}")
        return ix * nny + iy

    def element_connectivity(self) -> np.ndarray:
        conn = np.empty((self.nx * self.ny, 4), dtype=int)
        e = 0
        for ix in range(self.nx):
            for iy in range(self.ny):
                conn[e] = [self.node_id(ix + a, iy + b) for a in (0, 1) for b in (0, 1)]
                e += 1
        return conn

    def _side_counts(self) -> list[int]:
        return [self.ny, self.ny, self.nx, self.nx]

    @property
    def n_facets(self) -> int:
        return sum(self._side_counts())

    def side_facets(self, side: str) -> tuple[int, ...]:
        if side not in PLATE_SIDES:
            raise ConfigError(f"unknown plate side {side!r}, expected one of {PLATE_SIDES}")
        counts = self._side_counts()
        k = PLATE_SIDES.index(side)
        start = sum(counts[:k])
        return tuple(range(start, start + counts[k]))

    def facet_nodes_and_length(self, facet_id: int) -> tuple[np.ndarray, float]:
        counts = self._side_counts()
        if not 0 <= facet_id < self.n_facets:
            raise ConfigError(f"facet id {facet_id} outside 0..{self.n_facets - 1}")
        k = 0
        local = facet_id
        while local >= counts[k]:
            local -= counts[k]
            k += 1
        side = PLATE_SIDES[k]
        hx, hy = self.spacing
        if side[0] == "x":
            ix = self.nx if side[1] == "+" else 0
            nodes = np.array([self.node_id(ix, local), self.node_id(ix, local + 1)])
            return nodes, hy
        iy = self.ny if side[1] == "+" else 0
        nodes = np.array([self.node_id(local, iy), self.node_id(local + 1, iy)])
        return nodes, hx
