"""Assembly of the bilinear forms behind the eigenproblems.

Everything is assembled element by element into COO triplets and summed
into CSR; duplicate accumulation in scipy's conversion is index-sorted,
so the assembled matrix is identical regardless of element order or any
future parallel split of the element loop.

Quadrature: degree-4 rule for P2 and Morley forms, degree-2 for P1 forms;
both are exact for the corresponding polynomial integrands, so assembled
entries are exact up to rounding.
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import quadrature
from .spaces import MorleySpace, P1Space, P2Space, TaylorHoodSpace, _ref_to_physical

__all__ = [
    "assemble_stiffness",
    "assemble_mass",
    "assemble_morley_hessian",
    "assemble_morley_gradient",
    "assemble_vector_stiffness",
    "assemble_vector_mass",
    "assemble_divergence",
    "assemble_mixed_gradient",
    "assemble_partial_pairing",
    "restrict",
    "embed",
    "free_dofs",
    "write_matrix_market",
]


def _rule_for(space):
    if space.kind == "P1":
        return quadrature.rule_degree2()
    return quadrature.rule_degree4()


def _weights(space, wts):
    return space.det[:, None] * wts[None, :]


def _gradients(space, pts):
    """Physical shape gradients at the rule points, (nt, nq, nd, 2)."""
    if space.kind in ("P1", "P2"):
        gref = space.ref_gradients(pts)
        return np.einsum("tab,qkb->tqka", space.jac_inv_t, gref)
    if space.kind == "Morley":
        x = _ref_to_physical(space.mesh, pts)
        return space.shape_gradients(x)
    raise TypeError(f"no gradient rule for space kind {space.kind}")


def _to_csr(rows_map, cols_map, local, shape):
    nt, ni, nj = local.shape
    rows = np.broadcast_to(rows_map[:, :, None], (nt, ni, nj)).ravel()
    cols = np.broadcast_to(cols_map[:, None, :], (nt, ni, nj)).ravel()
    a = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape)
    return a.tocsr()


def assemble_stiffness(space) -> sp.csr_matrix:
    """Gradient form: K[i, j] = sum over elements of the integral of grad Ni . grad Nj.

    Symmetric positive semidefinite; the kernel is the constants until
    boundary constraints are applied.  Rejects vector-valued spaces.
    """
    if isinstance(space, TaylorHoodSpace):
        raise TypeError("scalar stiffness requested for a vector space")
    pts, wts = _rule_for(space)
    w = _weights(space, wts)
    g = _gradients(space, pts)
    local = np.einsum("tq,tqia,tqja->tij", w, g, g)
    n = space.dof_count
    return _to_csr(space.cell_dofs, space.cell_dofs, local, (n, n))


def assemble_mass(space) -> sp.csr_matrix:
    """L2 pairing M[i, j] = integral of Ni Nj; symmetric positive definite."""
    pts, wts = _rule_for(space)
    w = _weights(space, wts)
    n = space.dof_count
    if space.kind in ("P1", "P2"):
        vals = space.ref_values(pts)
        local = np.einsum("tq,qi,qj->tij", w, vals, vals)
    elif space.kind == "Morley":
        x = _ref_to_physical(space.mesh, pts)
        vals = space.shape_values(x)
        local = np.einsum("tq,tqi,tqj->tij", w, vals, vals)
    else:
        raise TypeError(f"no mass rule for space kind {space.kind}")
    return _to_csr(space.cell_dofs, space.cell_dofs, local, (n, n))


def assemble_morley_hessian(space: MorleySpace) -> sp.csr_matrix:
    """Piecewise Hessian Frobenius form for the buckling left-hand side.

    Second derivatives of Morley shapes are constant per element, so the
    element matrix is area times the Frobenius product of the Hessians
    (the xy component counted twice).  On clamped fields this form plays
    the role of the squared Laplacian: the difference, twice the Hessian
    determinant, integrates to zero in the conforming limit.
    """
    if space.kind != "Morley":
        raise TypeError("Hessian form is defined on the Morley space")
    H = space.shape_hessians()  # (nt, 3, 6)
    area = 0.5 * space.det
    frob = np.array([1.0, 2.0, 1.0])
    local = np.einsum("t,c,tci,tcj->tij", area, frob, H, H)
    n = space.dof_count
    return _to_csr(space.cell_dofs, space.cell_dofs, local, (n, n))


def assemble_morley_gradient(space: MorleySpace) -> sp.csr_matrix:
    """Piecewise gradient form on Morley, the buckling right-hand side."""
    return assemble_stiffness(space)


def assemble_vector_stiffness(th: TaylorHoodSpace) -> sp.csr_matrix:
    """Componentwise velocity stiffness, the viscous form of the Stokes pair."""
    k = assemble_stiffness(th.velocity)
    return sp.block_diag([k, k], format="csr")


def assemble_vector_mass(th: TaylorHoodSpace) -> sp.csr_matrix:
    m = assemble_mass(th.velocity)
    return sp.block_diag([m, m], format="csr")


def assemble_divergence(th: TaylorHoodSpace) -> sp.csr_matrix:
    """Divergence pairing B[q, u] = integral of q (du1/dx + du2/dy).

    Rows follow pressure dofs, columns the stacked velocity layout
    (x-components then y-components).
    """
    pts, wts = quadrature.rule_degree4()
    w = _weights(th.velocity, wts)
    pvals = th.pressure.ref_values(pts)  # (nq, 3)
    g = _gradients(th.velocity, pts)  # (nt, nq, 6, 2)
    local_x = np.einsum("tq,qi,tqj->tij", w, pvals, g[:, :, :, 0])
    local_y = np.einsum("tq,qi,tqj->tij", w, pvals, g[:, :, :, 1])
    npr, nu = th.pressure.dof_count, th.velocity.dof_count
    bx = _to_csr(th.pressure.cell_dofs, th.velocity.cell_dofs, local_x, (npr, nu))
    by = _to_csr(th.pressure.cell_dofs, th.velocity.cell_dofs, local_y, (npr, nu))
    return sp.hstack([bx, by], format="csr")


def assemble_mixed_gradient(p1: P1Space, other) -> sp.csr_matrix:
    """Cross-space gradient pairing G[i, j] = integral of grad phi_i . grad N_j.

    Used to recover the weak Laplacian of a Morley stream function: with
    clamped boundary slopes the identity integral(phi Lap psi) =
    -integral(grad phi . grad psi) holds elementwise without boundary
    terms, so M w = -G psi defines the vorticity projection.
    """
    pts, wts = quadrature.rule_degree4()
    w = _weights(p1, wts)
    gp = _gradients(p1, pts)
    go = _gradients(other, pts)
    local = np.einsum("tq,tqia,tqja->tij", w, gp, go)
    return _to_csr(p1.cell_dofs, other.cell_dofs, local, (p1.dof_count, other.dof_count))


def assemble_partial_pairing(p1: P1Space, p2: P2Space, axis: int) -> sp.csr_matrix:
    """Pairing C[i, j] = integral of phi_i times the axis-derivative of N_j."""
    pts, wts = quadrature.rule_degree4()
    w = _weights(p2, wts)
    pvals = p1.ref_values(pts)
    g = _gradients(p2, pts)
    local = np.einsum("tq,qi,tqj->tij", w, pvals, g[:, :, :, axis])
    return _to_csr(p1.cell_dofs, p2.cell_dofs, local, (p1.dof_count, p2.dof_count))


def restrict(a: sp.spmatrix, free_rows: np.ndarray, free_cols: np.ndarray | None = None) -> sp.csr_matrix:
    """Extract the submatrix over unconstrained dofs (rows, and cols if given)."""
    a = a.tocsr()
    if free_cols is None:
        free_cols = free_rows
    return a[free_rows, :][:, free_cols]


def embed(x: np.ndarray, free: np.ndarray, n: int) -> np.ndarray:
    """Scatter a reduced vector back to full length, zeros on constrained dofs."""
    full = np.zeros(n)
    full[free] = x
    return full


def free_dofs(n: int, constrained: np.ndarray) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[constrained] = False
    free = np.nonzero(mask)[0]
    if free.size == 0:
        raise ValueError("constraint set leaves no free dofs")
    return free


def write_matrix_market(path, a: sp.spmatrix) -> None:
    """Dump a sparse matrix in Matrix Market text form (debugging aid)."""
    scipy.io.mmwrite(path, a.tocoo())
