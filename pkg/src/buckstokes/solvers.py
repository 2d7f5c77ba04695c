"""Sparse factorization and shift-invert eigensolvers.

The eigensolver is block subspace iteration with a sparse LU of the
shifted operator: simple, robust for the smallest eigenvalues, and easy
to make deterministic (the starting subspace comes from a seeded
generator, and every step is a pure dense/sparse kernel).  The Stokes
variant applies the same iteration through the augmented saddle-point
matrix [[A - sigma M, Bt], [B, 0]], which keeps every iterate discretely
divergence-free without ever constructing a divergence-free basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as dla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "EigenPair",
    "Factorization",
    "FactorizationError",
    "NonConvergenceError",
    "factorize",
    "eigs_smallest",
    "eigs_stokes",
]

DEFAULT_TOL = 1e-9
MAX_ITERATIONS = 500


class FactorizationError(RuntimeError):
    """Structural or numerical singularity during sparse factorization."""


class NonConvergenceError(RuntimeError):
    """Subspace iteration failed to reach the residual tolerance."""


@dataclass
class EigenPair:
    """One eigenpair with its relative residual norm(A v - lambda B v)/norm(B v)."""

    value: float
    vector: np.ndarray
    residual: float


class Factorization:
    """Reusable sparse LU wrapper around scipy's SuperLU."""

    def __init__(self, a: sp.spmatrix):
        a = a.tocsc()
        if a.shape[0] != a.shape[1]:
            raise FactorizationError(f"matrix is not square: {a.shape}")
        # structural singularity: an empty row or column, reported by index
        row_counts = np.diff(a.tocsr().indptr)
        col_counts = np.diff(a.indptr)
        for name, counts in (("row", row_counts), ("column", col_counts)):
            empty = np.nonzero(counts == 0)[0]
            if empty.size:
                raise FactorizationError(f"structurally singular: empty {name} at index {empty[0]}")
        try:
            self._lu = spla.splu(a)
        except RuntimeError as exc:  # SuperLU signals numerical singularity this way
            raise FactorizationError(f"numerically singular factorization: {exc}") from exc
        self.shape = a.shape

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(b))


def factorize(a: sp.spmatrix) -> Factorization:
    """Factor a square sparse matrix for repeated solves.

    Works for symmetric positive definite and symmetric indefinite
    (saddle-point) matrices alike; raises FactorizationError with the
    offending index for structurally singular inputs.
    """
    return Factorization(a)


def _ritz(a, b_apply, y):
    """Rayleigh-Ritz on the subspace spanned by the columns of y."""
    ay = a @ y
    by = b_apply(y)
    ar = y.T @ ay
    br = y.T @ by
    vals, s = dla.eigh(ar, br)
    return vals, y @ s


def eigs_smallest(
    a: sp.spmatrix,
    b: sp.spmatrix,
    k: int,
    shift: float = 0.0,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    max_iterations: int = MAX_ITERATIONS,
) -> list[EigenPair]:
    """k smallest eigenpairs of A v = lambda B v, A symmetric PSD, B symmetric PD.

    Shift-invert block subspace iteration (block k + 4): factor A - shift*B
    once, repeatedly apply its inverse to B times the current block,
    re-orthonormalize, and extract Ritz pairs until every requested
    residual norm(A v - lambda B v)/(norm(A v) + lambda norm(B v)) falls
    below tol.  Vectors come back B-orthonormal, eigenvalues ascending.  The
    starting block is drawn from a seeded generator, so repeated runs are
    bit-identical.
    """
    n = a.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    block = min(n, k + 4)
    if block < k:
        raise ValueError(f"requested {k} eigenpairs of a {n}-dimensional problem")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, block))
    op = factorize((a - shift * b).tocsc())
    b = b.tocsr()
    a = a.tocsr()
    for _ in range(max_iterations):
        y = op.solve(b @ x)
        y, _ = np.linalg.qr(y)
        try:
            vals, v = _ritz(a, lambda z: b @ z, y)
        except np.linalg.LinAlgError as exc:
            raise NonConvergenceError(f"projected mass matrix not positive definite: {exc}") from exc
        x = v
        res = _residuals(a, b, vals[:k], v[:, :k])
        if np.all(res <= tol):
            return [EigenPair(float(vals[i]), v[:, i].copy(), float(res[i])) for i in range(k)]
    raise NonConvergenceError(f"no convergence to tol={tol} in {max_iterations} iterations")


def _residuals(a, b, vals, v):
    av = a @ v
    bv = b @ v
    r = av - bv * vals[None, :]
    # scale-free: relative to the size of the two matched terms, so the
    # attainable floor stays near machine precision even when norm(A) is
    # large (fourth-order forms scale like 1/h^2 against second-order ones)
    denom = np.linalg.norm(av, axis=0) + np.abs(vals) * np.linalg.norm(bv, axis=0)
    return np.linalg.norm(r, axis=0) / denom


def eigs_stokes(
    a: sp.spmatrix,
    b_div: sp.spmatrix,
    m: sp.spmatrix,
    k: int,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    max_iterations: int = MAX_ITERATIONS,
    pressure_weights: np.ndarray | None = None,
):
    """k smallest Stokes eigenpairs on the discretely divergence-free subspace.

    Parameters are the constrained velocity stiffness A, the divergence
    pairing B_div (pressure rows by velocity columns), and the velocity
    mass M.  One pressure dof (row 0) is pinned to remove the constant
    kernel; the augmented matrix [[A, Bt], [B, 0]] is factored once and
    each iteration solves it with right-hand side (M x, 0), which projects
    the block onto the divergence-free subspace while applying A^{-1} M.

    Returns (pairs, pressures): B-orthonormal velocity eigenpairs sorted
    ascending, and per-mode pressures recovered from the residual equation
    A u - lambda M u = B_div^T p by least squares, re-centered to mean zero
    against `pressure_weights` (integral weights of the pressure basis).

    Each returned velocity satisfies norm(B_div u) <= tol * norm(u).
    """
    n = a.shape[0]
    bt = b_div.tocsr()[1:]  # pin pressure dof 0
    npr = bt.shape[0]
    aug = sp.bmat([[a, bt.T], [bt, None]], format="csc")
    op = factorize(aug)
    gram = factorize((bt @ bt.T).tocsc())

    block = min(n, k + 4)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, block))
    a = a.tocsr()
    m = m.tocsr()
    zeros = np.zeros((npr, block))

    def apply_inverse(z):
        rhs = np.vstack([m @ z, zeros[:, : z.shape[1]]])
        return op.solve(rhs)[:n]

    for _ in range(max_iterations):
        y = apply_inverse(x)
        y, _ = np.linalg.qr(y)
        try:
            vals, v = _ritz(a, lambda z: m @ z, y)
        except np.linalg.LinAlgError as exc:
            raise NonConvergenceError(f"projected mass matrix not positive definite: {exc}") from exc
        x = v
        # full residual includes the recovered pressure gradient
        av = a @ v[:, :k]
        mv = m @ v[:, :k]
        r0 = av - mv * vals[None, :k]
        p = gram.solve(bt @ r0)
        denom = np.linalg.norm(av, axis=0) + np.abs(vals[:k]) * np.linalg.norm(mv, axis=0)
        res = np.linalg.norm(r0 - bt.T @ p, axis=0) / denom
        if np.all(res <= tol):
            pressures = np.vstack([np.zeros((1, k)), p])
            if pressure_weights is not None:
                mean = (pressure_weights @ pressures) / pressure_weights.sum()
                pressures = pressures - mean[None, :]
            pairs = [EigenPair(float(vals[i]), v[:, i].copy(), float(res[i])) for i in range(k)]
            return pairs, pressures
    raise NonConvergenceError(f"no convergence to tol={tol} in {max_iterations} iterations")
