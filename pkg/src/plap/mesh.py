"""Uniform simplicial meshes of the unit square and cube with P1 plumbing.

A mesh stores, besides vertices and simplices, everything the nonlinear
solver needs repeatedly: per-simplex volumes, the (constant) gradients of
the P1 hat functions on each simplex, a boundary mask and the lumped
vertex weights used by the nodal quadrature rule

    integral(u) ~ sum_T vol(T) * mean(u at vertices of T).

The rule is exact for piecewise-linear integrands, so gradients of P1
fields are integrated exactly and nodal nonlinearities at second order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionMismatchError

__all__ = [
    "Mesh",
    "build_mesh",
    "integrate",
    "gradient_table",
    "apply_dirichlet",
    "laplace_stiffness",
    "dump_mesh",
]


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh of (0,1)^dim, immutable after construction.

    Attributes
    ----------
    dim : int
        Space dimension, 2 or 3.
    cells_per_side : int
        Number of grid cells along each axis.
    vertices : ndarray, shape (n_vertices, dim)
    simplices : ndarray, shape (n_simplices, dim+1)
        Vertex indices; 2 triangles per square cell, 6 tetrahedra per cube.
    volumes : ndarray, shape (n_simplices,)
    shape_gradients : ndarray, shape (n_simplices, dim+1, dim)
        Gradient of each vertex hat function restricted to the simplex.
    boundary : ndarray of bool, shape (n_vertices,)
    lumped_mass : ndarray, shape (n_vertices,)
        Vertex weights of the nodal quadrature rule; sums to 1.
    """

    dim: int
    cells_per_side: int
    vertices: np.ndarray
    simplices: np.ndarray
    volumes: np.ndarray
    shape_gradients: np.ndarray
    boundary: np.ndarray
    lumped_mass: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_simplices(self) -> int:
        return self.simplices.shape[0]


def _check_field(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise DimensionMismatchError(
            f"field has shape {u.shape}, mesh has {mesh.n_vertices} vertices"
        )
    return u


def build_mesh(dim: int, cells_per_side: int) -> Mesh:
    """Triangulate (0,1)^dim with a uniform grid of `cells_per_side`^dim cells.

    Squares are split into 2 triangles along the (0,0)-(1,1) diagonal;
    cubes into 6 tetrahedra (one per axis permutation, all sharing the
    main diagonal), which keeps the triangulation conforming.
    """
    if dim not in (2, 3):
        raise ConfigurationError(f"dim must be 2 or 3, got {dim}")
    m = int(cells_per_side)
    if m < 1:
        raise ConfigurationError(f"cells_per_side must be >= 1, got {cells_per_side}")

    side = m + 1
    axes = [np.linspace(0.0, 1.0, side)] * dim
    grids = np.meshgrid(*axes, indexing="ij")
    vertices = np.stack([g.ravel() for g in grids], axis=1)

    strides = np.array([side ** (dim - 1 - k) for k in range(dim)])

    def vid(idx):
        return int(np.dot(idx, strides))

    simplices = []
    cells = itertools.product(range(m), repeat=dim)
    if dim == 2:
        for (i, j) in cells:
            v00 = vid((i, j))
            v10 = vid((i + 1, j))
            v01 = vid((i, j + 1))
            v11 = vid((i + 1, j + 1))
            simplices.append((v00, v10, v11))
            simplices.append((v00, v11, v01))
    else:
        perms = sorted(itertools.permutations(range(3)))
        for cell in cells:
            base = np.array(cell)
            for perm in perms:
                corner = base.copy()
                tet = [vid(corner)]
                for axis in perm:
                    corner = corner.copy()
                    corner[axis] += 1
                    tet.append(vid(corner))
                simplices.append(tuple(tet))
    simplices = np.array(simplices, dtype=np.int64)

    # Per-simplex geometry: edge matrix E rows are x_i - x_0; the hat-function
    # gradients for vertices 1..dim are the columns of inv(E), and vertex 0
    # carries minus their sum so each row block sums to zero.
    coords = vertices[simplices]                       # (ns, dim+1, dim)
    edges = coords[:, 1:, :] - coords[:, :1, :]        # (ns, dim, dim)
    dets = np.linalg.det(edges)
    volumes = np.abs(dets) / np.prod(range(1, dim + 1))
    inv_edges = np.linalg.inv(edges)                   # (ns, dim, dim)
    grads = np.empty((simplices.shape[0], dim + 1, dim))
    grads[:, 1:, :] = np.transpose(inv_edges, (0, 2, 1))
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)

    boundary = np.zeros(vertices.shape[0], dtype=bool)
    for k in range(dim):
        boundary |= np.isclose(vertices[:, k], 0.0) | np.isclose(vertices[:, k], 1.0)

    lumped = np.zeros(vertices.shape[0])
    np.add.at(lumped, simplices.ravel(),
              np.repeat(volumes / (dim + 1), dim + 1))

    for arr in (vertices, simplices, volumes, grads, boundary, lumped):
        arr.flags.writeable = False

    return Mesh(dim, m, vertices, simplices, volumes, grads, boundary, lumped)


def integrate(mesh: Mesh, values: np.ndarray) -> float:
    """Nodal quadrature: sum over simplices of volume times vertex mean."""
    values = _check_field(mesh, values)
    return float(np.dot(mesh.lumped_mass, values))


def gradient_table(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Per-simplex gradient of the P1 interpolant of u, shape (n_simplices, dim)."""
    u = _check_field(mesh, u)
    return np.einsum("sid,si->sd", mesh.shape_gradients, u[mesh.simplices])


def apply_dirichlet(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Return a copy of u with boundary vertices set to zero. Idempotent."""
    u = _check_field(mesh, u).copy()
    u[mesh.boundary] = 0.0
    return u


def laplace_stiffness(mesh: Mesh):
    """Assemble the P1 stiffness matrix of -Laplace as CSR (no boundary handling)."""
    from scipy import sparse

    ns, nloc, dim = mesh.shape_gradients.shape
    local = np.einsum("sid,sjd->sij", mesh.shape_gradients, mesh.shape_gradients)
    local *= mesh.volumes[:, None, None]
    rows = np.repeat(mesh.simplices, nloc, axis=1).ravel()
    cols = np.tile(mesh.simplices, (1, nloc)).ravel()
    mat = sparse.coo_matrix(
        (local.ravel(), (rows, cols)),
        shape=(mesh.n_vertices, mesh.n_vertices),
    )
    return mat.tocsr()


def dump_mesh(mesh: Mesh) -> str:
    """Debug dump: one `v x y [z] flag` line per vertex, one `s i0 i1 i2 [i3]`
    line per simplex."""
    lines = []
    for x, flag in zip(mesh.vertices, mesh.boundary):
        coords = " ".join(format(c, ".17g") for c in x)
        lines.append(f"v {coords} {int(flag)}")
    for simplex in mesh.simplices:
        lines.append("s " + " ".join(str(int(i)) for i in simplex))
    return "\n".join(lines) + "\n"
