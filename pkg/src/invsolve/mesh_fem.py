"""Friedrichs-Keller triangulation of the unit square and P1 finite elements.

Builds the uniform mesh with ``nh`` vertices per side (all cell diagonals
running bottom-left to top-right) and assembles the interior-node operators
every other module works with: the stiffness matrix A, the consistent mass
matrix M, and the lumped mass diagonal D with entries omega_i / 3, where
omega_i is the area of the support of the i-th nodal basis function.
Homogeneous Dirichlet conditions are imposed by eliminating boundary
vertices, so all matrices are symmetric positive definite.

A "node field" is simply a numpy vector of nodal coefficients over the
interior vertices, in row-major order (x fastest).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

NodeField = np.ndarray


@dataclass(frozen=True)
class Mesh:
    """Uniform triangulation of (0,1)^2 with nh x nh vertices.

    ``interior_index`` lists the full-grid indices of the (nh-2)^2 interior
    vertices in dense order; ``full_to_interior`` is the inverse map with -1
    on boundary vertices. Instances are immutable and safe to share.
    """

    nh: int
    h: float
    nodes: np.ndarray            # (nh*nh, 2) vertex coordinates
    triangles: np.ndarray        # (2*(nh-1)^2, 3) vertex index triples
    interior_index: np.ndarray   # (d_h,) full-grid indices of interior vertices
    full_to_interior: np.ndarray # (nh*nh,) dense interior index or -1

    @property
    def d_h(self) -> int:
        return self.interior_index.size

    @property
    def interior_coords(self) -> np.ndarray:
        """Coordinates of the interior vertices, shape (d_h, 2)."""
        return self.nodes[self.interior_index]


@dataclass(frozen=True)
class FEOperators:
    """Interior-node P1 operators of a mesh.

    A and M are assembled once and exactly symmetric; D is the lumped mass
    diagonal omega/3. Immutable, shareable across concurrent runs.
    """

    mesh: Mesh
    A: sp.csr_array
    M: sp.csr_array
    D: np.ndarray
    omega: np.ndarray

    @property
    def d_h(self) -> int:
        return self.mesh.d_h


def build_mesh(nh: int) -> Mesh:
    """Build the Friedrichs-Keller mesh with nh vertices per side (nh >= 3)."""
    if nh < 3:
        raise ValueError(f"need nh >= 3 to have interior vertices, got {nh}")
    h = 1.0 / (nh - 1)
    ix, iy = np.meshgrid(np.arange(nh), np.arange(nh), indexing="xy")
    nodes = np.column_stack([ix.ravel() / (nh - 1), iy.ravel() / (nh - 1)])

    # one square cell -> two triangles split along the bottom-left/top-right
    # diagonal; vertex order keeps positive orientation
    cx, cy = np.meshgrid(np.arange(nh - 1), np.arange(nh - 1), indexing="xy")
    v00 = (cy * nh + cx).ravel()
    v10 = v00 + 1
    v01 = v00 + nh
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.vstack([lower, upper])

    interior_mask = ((ix > 0) & (ix < nh - 1) & (iy > 0) & (iy < nh - 1)).ravel()
    interior_index = np.flatnonzero(interior_mask)
    full_to_interior = np.full(nh * nh, -1, dtype=np.int64)
    full_to_interior[interior_index] = np.arange(interior_index.size)

    for arr in (nodes, triangles, interior_index, full_to_interior):
        arr.setflags(write=False)
    return Mesh(nh=nh, h=h, nodes=nodes, triangles=triangles,
                interior_index=interior_index, full_to_interior=full_to_interior)


def assemble_operators(mesh: Mesh) -> FEOperators:
    """Assemble stiffness A, consistent mass M, lumped mass D = omega/3.

    Per-triangle closed-form P1 integration (no numerical quadrature);
    boundary rows/columns dropped during assembly.
    """
    tri = mesh.triangles
    coords = mesh.nodes[tri]               # (nt, 3, 2)
    x = coords[:, :, 0]
    y = coords[:, :, 1]

    # gradients of barycentric coordinates: grad lambda_i = (b_i, c_i) / (2|T|)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
                  - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))

    k_loc = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
        / (4.0 * area)[:, None, None]
    m_loc = (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))

    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    ri = mesh.full_to_interior[rows]
    ci = mesh.full_to_interior[cols]
    keep = (ri >= 0) & (ci >= 0)
    d_h = mesh.d_h
    shape = (d_h, d_h)
    A = sp.coo_array((k_loc.ravel()[keep], (ri[keep], ci[keep])), shape=shape).tocsr()
    M = sp.coo_array((m_loc.ravel()[keep], (ri[keep], ci[keep])), shape=shape).tocsr()

    omega_full = np.bincount(tri.ravel(), weights=np.repeat(area, 3),
                             minlength=mesh.nh ** 2)
    omega = omega_full[mesh.interior_index]
    D = omega / 3.0
    for arr in (omega, D):
        arr.setflags(write=False)
    return FEOperators(mesh=mesh, A=A, M=M, D=D, omega=omega)


def _check_dim(ops: FEOperators, v: np.ndarray, name: str = "field") -> None:
    if v.shape != (ops.d_h,):
        raise ValueError(f"{name} has shape {v.shape}, expected ({ops.d_h},)")


def indicator_matrix(ops: FEOperators, y: NodeField) -> sp.dia_array:
    """Diagonal matrix K_y with entries (omega_i/3) * [y_i > 0] (strict)."""
    _check_dim(ops, y, "y")
    return sp.diags_array(np.where(y > 0.0, ops.D, 0.0))


def active_matrix(ops: FEOperators, active: np.ndarray) -> sp.dia_array:
    """K for a given active-set mask, bypassing the sign test."""
    _check_dim(ops, active, "active")
    return sp.diags_array(np.where(active, ops.D, 0.0))


def l2_inner(ops: FEOperators, v: NodeField, w: NodeField) -> float:
    """Discrete L2 inner product v' M w."""
    _check_dim(ops, v, "v")
    _check_dim(ops, w, "w")
    return float(v @ (ops.M @ w))


def l2_norm(ops: FEOperators, v: NodeField) -> float:
    """Exact L2 norm of the FE function with coefficients v: sqrt(v' M v)."""
    _check_dim(ops, v, "v")
    return float(np.sqrt(max(v @ (ops.M @ v), 0.0)))


def interpolate(f, mesh: Mesh) -> NodeField:
    """Nodal interpolant of f(x1, x2) on the interior vertices.

    f must accept coordinate arrays (numpy broadcasting semantics).
    """
    pts = mesh.interior_coords
    values = np.broadcast_to(np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float),
                             (mesh.d_h,)).copy()
    if not np.all(np.isfinite(values)):
        raise ValueError("interpolated function produced non-finite values")
    return values


def dump_operators(ops: FEOperators, directory: str) -> None:
    """Debug dump of A, M, D in MatrixMarket coordinate format."""
    os.makedirs(directory, exist_ok=True)
    mmwrite(os.path.join(directory, "A.mtx"), sp.coo_array(ops.A))
    mmwrite(os.path.join(directory, "M.mtx"), sp.coo_array(ops.M))
    mmwrite(os.path.join(directory, "D.mtx"), sp.coo_array(sp.diags_array(ops.D)))
