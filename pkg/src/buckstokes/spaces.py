"""Finite-element spaces on triangle meshes.

Provides continuous P1 and P2 scalar spaces, the nonconforming Morley
element (vertex values plus edge-midpoint normal derivatives, the smallest
element that converges for fourth-order problems), and the Taylor-Hood
P2/P1 velocity-pressure pair.  Each space carries its element-to-dof map,
its boundary dof sets, and enough per-element geometry to evaluate values,
gradients, and (for Morley) piecewise second derivatives.

Morley normal-derivative dofs use a global edge orientation: the unit
normal of edge (a, b) with a < b is the tangent b - a rotated clockwise.
Defining the dof functional with the global normal makes the element
matrices consistent across neighboring triangles without sign bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Mesh

__all__ = [
    "mesh_edges",
    "P1Space",
    "P2Space",
    "MorleySpace",
    "TaylorHoodSpace",
    "FieldFunction",
    "evaluate_on_elements",
    "evaluate_gradient_on_elements",
    "morley_second_derivatives",
    "evaluate_at_points",
    "interpolate",
    "interpolate_morley",
]

_LOCAL_EDGES = [(0, 1), (1, 2), (2, 0)]


def mesh_edges(mesh: Mesh):
    """Unique undirected edges of a mesh.

    Returns
    -------
    edges : (ne, 2) int array, each row sorted ascending
    tri_edges : (nt, 3) int array
        Edge index for local edges (0,1), (1,2), (2,0) of each triangle.
    boundary_edge_ids : (nb,) int array
        Rows of `edges` lying on the boundary loop.
    """
    nv = mesh.vertices.shape[0]
    pairs = np.sort(mesh.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    tri_edges = inverse.reshape(-1, 3)
    keys = edges[:, 0] * nv + edges[:, 1]
    b = np.sort(mesh.boundary_edges, axis=1)
    idx = np.searchsorted(keys, b[:, 0] * nv + b[:, 1])
    if not np.array_equal(keys[idx], b[:, 0] * nv + b[:, 1]):
        raise ValueError("boundary edges missing from triangulation")
    return edges, tri_edges, idx


def _jacobians(mesh: Mesh):
    p = mesh.vertices[mesh.triangles]
    j1 = p[:, 1] - p[:, 0]
    j2 = p[:, 2] - p[:, 0]
    det = j1[:, 0] * j2[:, 1] - j1[:, 1] * j2[:, 0]
    inv_t = np.empty((det.size, 2, 2))
    inv_t[:, 0, 0] = j2[:, 1]
    inv_t[:, 0, 1] = -j1[:, 1]
    inv_t[:, 1, 0] = -j2[:, 0]
    inv_t[:, 1, 1] = j1[:, 0]
    inv_t /= det[:, None, None]
    return det, inv_t


class P1Space:
    """Continuous piecewise-linear scalars; one dof per vertex."""

    kind = "P1"
    dofs_per_cell = 3

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.dof_count = mesh.vertices.shape[0]
        self.cell_dofs = np.ascontiguousarray(mesh.triangles)
        self.boundary_dofs = np.sort(mesh.boundary_loop).astype(np.int64)
        self.dof_points = mesh.vertices
        self.det, self.jac_inv_t = _jacobians(mesh)

    def ref_values(self, pts):
        xi, eta = pts[:, 0], pts[:, 1]
        return np.stack([1.0 - xi - eta, xi, eta], axis=1)

    def ref_gradients(self, pts):
        g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return np.broadcast_to(g, (pts.shape[0], 3, 2))


class P2Space:
    """Continuous piecewise-quadratic scalars; vertex and edge-midpoint dofs."""

    kind = "P2"
    dofs_per_cell = 6

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        nv = mesh.vertices.shape[0]
        edges, tri_edges, bnd = mesh_edges(mesh)
        self.edges = edges
        self.dof_count = nv + edges.shape[0]
        self.cell_dofs = np.concatenate([mesh.triangles, nv + tri_edges], axis=1)
        self.boundary_dofs = np.sort(np.concatenate([mesh.boundary_loop, nv + bnd])).astype(np.int64)
        self.dof_points = np.concatenate(
            [mesh.vertices, 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])]
        )
        self.det, self.jac_inv_t = _jacobians(mesh)

    def ref_values(self, pts):
        xi, eta = pts[:, 0], pts[:, 1]
        l0 = 1.0 - xi - eta
        return np.stack(
            [
                l0 * (2.0 * l0 - 1.0),
                xi * (2.0 * xi - 1.0),
                eta * (2.0 * eta - 1.0),
                4.0 * l0 * xi,
                4.0 * xi * eta,
                4.0 * eta * l0,
            ],
            axis=1,
        )

    def ref_gradients(self, pts):
        xi, eta = pts[:, 0], pts[:, 1]
        l0 = 1.0 - xi - eta
        z = np.zeros_like(xi)
        gl0 = 1.0 - 4.0 * l0
        g = np.stack(
            [
                np.stack([gl0, gl0], axis=1),
                np.stack([4.0 * xi - 1.0, z], axis=1),
                np.stack([z, 4.0 * eta - 1.0], axis=1),
                np.stack([4.0 * (l0 - xi), -4.0 * xi], axis=1),
                np.stack([4.0 * eta, 4.0 * xi], axis=1),
                np.stack([-4.0 * eta, 4.0 * (l0 - eta)], axis=1),
            ],
            axis=1,
        )
        return g


class MorleySpace:
    """Morley element: vertex values and edge-midpoint normal derivatives.

    Shape functions are quadratic per element, built by inverting the
    6x6 dof-functional matrix in a centered, diameter-scaled monomial
    basis (conditioning stays O(1) independent of mesh size).  The basis
    coefficient tensor, the per-element Hessians (constant on each
    element), and the scaled-coordinate frames are precomputed.
    """

    kind = "Morley"
    dofs_per_cell = 6

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        nv = mesh.vertices.shape[0]
        edges, tri_edges, bnd = mesh_edges(mesh)
        self.edges = edges
        self.dof_count = nv + edges.shape[0]
        self.cell_dofs = np.concatenate([mesh.triangles, nv + tri_edges], axis=1)
        # clamped constraints: boundary vertex values and boundary normal dofs
        self.boundary_value_dofs = np.sort(mesh.boundary_loop).astype(np.int64)
        self.boundary_normal_dofs = np.sort(nv + bnd).astype(np.int64)
        self.clamped_dofs = np.sort(np.concatenate([self.boundary_value_dofs, self.boundary_normal_dofs]))
        self.det, self.jac_inv_t = _jacobians(mesh)

        p = mesh.vertices[mesh.triangles]
        self.centroid = p.mean(axis=1)
        e = p[:, [1, 2, 0]] - p
        self.scale = np.max(np.hypot(e[:, :, 0], e[:, :, 1]), axis=1)
        mids = 0.5 * (p + p[:, [1, 2, 0]])
        q = (p - self.centroid[:, None, :]) / self.scale[:, None, None]
        mq = (mids - self.centroid[:, None, :]) / self.scale[:, None, None]
        # global edge normals (tangent of the sorted pair, rotated clockwise)
        ge = edges[tri_edges]
        t = mesh.vertices[ge[:, :, 1]] - mesh.vertices[ge[:, :, 0]]
        t /= np.hypot(t[:, :, 0], t[:, :, 1])[:, :, None]
        nx, ny = t[:, :, 1], -t[:, :, 0]

        F = np.empty((p.shape[0], 6, 6))
        x, y = q[:, :, 0], q[:, :, 1]
        F[:, 0:3, 0] = 1.0
        F[:, 0:3, 1] = x
        F[:, 0:3, 2] = y
        F[:, 0:3, 3] = x * x
        F[:, 0:3, 4] = x * y
        F[:, 0:3, 5] = y * y
        mx, my = mq[:, :, 0], mq[:, :, 1]
        s = self.scale[:, None]
        F[:, 3:6, 0] = 0.0
        F[:, 3:6, 1] = nx / s
        F[:, 3:6, 2] = ny / s
        F[:, 3:6, 3] = 2.0 * mx * nx / s
        F[:, 3:6, 4] = (my * nx + mx * ny) / s
        F[:, 3:6, 5] = 2.0 * my * ny / s
        self.coeff = np.linalg.inv(F)  # (nt, monomial, shape)

    def local_coords(self, x):
        """Physical points (nt, nq, 2) to the per-element scaled frame."""
        return (x - self.centroid[:, None, :]) / self.scale[:, None, None]

    def shape_values(self, x):
        """Shape-function values at physical points x of shape (nt, nq, 2)."""
        q = self.local_coords(x)
        mono = np.stack(
            [np.ones_like(q[:, :, 0]), q[:, :, 0], q[:, :, 1], q[:, :, 0] ** 2, q[:, :, 0] * q[:, :, 1], q[:, :, 1] ** 2],
            axis=2,
        )
        return np.einsum("tqm,tmj->tqj", mono, self.coeff)

    def shape_gradients(self, x):
        """Physical gradients at physical points x of shape (nt, nq, 2)."""
        q = self.local_coords(x)
        zeros = np.zeros_like(q[:, :, 0])
        ones = np.ones_like(q[:, :, 0])
        gx = np.stack([zeros, ones, zeros, 2.0 * q[:, :, 0], q[:, :, 1], zeros], axis=2)
        gy = np.stack([zeros, zeros, ones, zeros, q[:, :, 0], 2.0 * q[:, :, 1]], axis=2)
        s = self.scale[:, None, None]
        return np.stack(
            [np.einsum("tqm,tmj->tqj", gx, self.coeff) / s, np.einsum("tqm,tmj->tqj", gy, self.coeff) / s],
            axis=3,
        )

    def shape_hessians(self):
        """Constant per-element second derivatives (nt, 3, 6), rows (xx, xy, yy)."""
        s2 = (self.scale**2)[:, None]
        hxx = 2.0 * self.coeff[:, 3, :] / s2
        hxy = self.coeff[:, 4, :] / s2
        hyy = 2.0 * self.coeff[:, 5, :] / s2
        return np.stack([hxx, hxy, hyy], axis=1)


class TaylorHoodSpace:
    """P2 vector velocity with P1 pressure; inf-sup stable Stokes pair.

    Velocity dofs are laid out as all x-components then all y-components.
    """

    kind = "TaylorHood"

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.velocity = P2Space(mesh)
        self.pressure = P1Space(mesh)
        self.velocity_dof_count = 2 * self.velocity.dof_count
        n = self.velocity.dof_count
        bd = self.velocity.boundary_dofs
        self.noslip_dofs = np.sort(np.concatenate([bd, n + bd]))


@dataclass
class FieldFunction:
    """A finite-element field: a space and its coefficient vector."""

    space: object
    coefficients: np.ndarray

    def __post_init__(self):
        n = getattr(self.space, "dof_count", None)
        if n is not None and self.coefficients.shape != (n,):
            raise ValueError(f"coefficient length {self.coefficients.shape} != dof count {n}")


def _ref_to_physical(mesh, pts):
    p = mesh.vertices[mesh.triangles]
    return (
        p[:, 0][:, None, :]
        + pts[None, :, 0, None] * (p[:, 1] - p[:, 0])[:, None, :]
        + pts[None, :, 1, None] * (p[:, 2] - p[:, 0])[:, None, :]
    )


def evaluate_on_elements(field: FieldFunction, ref_pts: np.ndarray) -> np.ndarray:
    """Field values at the given reference points of every element, (nt, nq)."""
    space = field.space
    coeffs = field.coefficients[space.cell_dofs]
    if space.kind in ("P1", "P2"):
        vals = space.ref_values(ref_pts)
        return coeffs @ vals.T
    if space.kind == "Morley":
        x = _ref_to_physical(space.mesh, ref_pts)
        return np.einsum("tqj,tj->tq", space.shape_values(x), coeffs)
    raise TypeError(f"cannot evaluate on space kind {space.kind}")


def evaluate_gradient_on_elements(field: FieldFunction, ref_pts: np.ndarray) -> np.ndarray:
    """Field gradients at reference points of every element, (nt, nq, 2)."""
    space = field.space
    coeffs = field.coefficients[space.cell_dofs]
    if space.kind in ("P1", "P2"):
        gref = space.ref_gradients(ref_pts)  # (nq, nd, 2)
        gphys = np.einsum("tij,qkj->tqki", space.jac_inv_t, gref)
        return np.einsum("tqki,tk->tqi", gphys, coeffs)
    if space.kind == "Morley":
        x = _ref_to_physical(space.mesh, ref_pts)
        return np.einsum("tqjd,tj->tqd", space.shape_gradients(x), coeffs)
    raise TypeError(f"cannot evaluate gradients on space kind {space.kind}")


def morley_second_derivatives(field: FieldFunction) -> np.ndarray:
    """Per-element (xx, xy, yy) second derivatives of a Morley field, (nt, 3)."""
    space = field.space
    if space.kind != "Morley":
        raise TypeError("second derivatives are exposed for Morley fields only")
    return np.einsum("tcj,tj->tc", space.shape_hessians(), field.coefficients[space.cell_dofs])


def evaluate_at_points(field: FieldFunction, points: np.ndarray) -> np.ndarray:
    """Evaluate at arbitrary points inside the domain (brute-force location)."""
    mesh = field.space.mesh
    points = np.atleast_2d(points)
    p = mesh.vertices[mesh.triangles]
    j1 = p[:, 1] - p[:, 0]
    j2 = p[:, 2] - p[:, 0]
    det = j1[:, 0] * j2[:, 1] - j1[:, 1] * j2[:, 0]
    out = np.empty(points.shape[0])
    for i, pt in enumerate(points):
        d = pt[None, :] - p[:, 0]
        xi = (d[:, 0] * j2[:, 1] - d[:, 1] * j2[:, 0]) / det
        eta = (j1[:, 0] * d[:, 1] - j1[:, 1] * d[:, 0]) / det
        inside = (xi >= -1e-12) & (eta >= -1e-12) & (xi + eta <= 1.0 + 1e-12)
        hits = np.nonzero(inside)[0]
        if hits.size == 0:
            raise ValueError(f"point {pt} outside the mesh")
        t = hits[0]
        ref = np.array([[xi[t], eta[t]]])
        coeffs = field.coefficients[field.space.cell_dofs[t]]
        if field.space.kind in ("P1", "P2"):
            out[i] = float(field.space.ref_values(ref) @ coeffs)
        elif field.space.kind == "Morley":
            q = (pt - field.space.centroid[t]) / field.space.scale[t]
            mono = np.array([1.0, q[0], q[1], q[0] ** 2, q[0] * q[1], q[1] ** 2])
            out[i] = float(mono @ field.space.coeff[t] @ coeffs)
        else:
            raise TypeError(f"cannot evaluate space kind {field.space.kind}")
    return out


def interpolate(space, f) -> FieldFunction:
    """Nodal interpolation onto P1 or P2 (f maps (n, 2) points to values)."""
    if space.kind not in ("P1", "P2"):
        raise TypeError("nodal interpolation needs point-value dofs; use interpolate_morley")
    return FieldFunction(space, np.asarray(f(space.dof_points), dtype=float))


def interpolate_morley(space: MorleySpace, f, grad_f) -> FieldFunction:
    """Morley interpolation from values at vertices and normal slopes at edge midpoints."""
    mesh = space.mesh
    nv = mesh.vertices.shape[0]
    coeffs = np.empty(space.dof_count)
    coeffs[:nv] = np.asarray(f(mesh.vertices), dtype=float)
    edges = space.edges
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    t = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    t /= np.hypot(t[:, 0], t[:, 1])[:, None]
    normals = np.stack([t[:, 1], -t[:, 0]], axis=1)
    g = np.asarray(grad_f(mids), dtype=float)
    coeffs[nv:] = np.sum(g * normals, axis=1)
    return FieldFunction(space, coeffs)
