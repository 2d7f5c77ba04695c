"""Quadrature rules on the reference triangle {x >= 0, y >= 0, x + y <= 1}.

Each rule is a (points, weights) pair with points of shape (n, 2) and
weights summing to the reference area 1/2.  The degree-2 rule serves P1
forms, the degree-4 rule P2 and piecewise-quadratic forms (both choices
make the assembled integrals exact for those elements), and the collapsed
tensor-Gauss rule handles smooth non-polynomial integrands such as
interpolation errors against closed-form eigenfunctions.
"""

from __future__ import annotations

import numpy as np

__all__ = ["rule_degree2", "rule_degree4", "rule_collapsed", "map_to_triangle"]


def rule_degree2():
    """Three-point edge-midpoint rule, exact for polynomials of degree 2."""
    pts = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
    wts = np.full(3, 1.0 / 6.0)
    return pts, wts


def rule_degree4():
    """Six-point rule with two symmetry orbits, exact through degree 4."""
    a1, w1 = 0.445948490915965, 0.223381589678011
    a2, w2 = 0.091576213509771, 0.109951743655322
    pts = np.array(
        [
            [a1, a1],
            [1.0 - 2.0 * a1, a1],
            [a1, 1.0 - 2.0 * a1],
            [a2, a2],
            [1.0 - 2.0 * a2, a2],
            [a2, 1.0 - 2.0 * a2],
        ]
    )
    wts = 0.5 * np.array([w1, w1, w1, w2, w2, w2])
    return pts, wts


def rule_collapsed(n: int = 8):
    """Tensor Gauss rule collapsed onto the triangle, exact through degree 2n-2.

    The square [0,1]^2 maps onto the triangle by (u, v) -> (u, v(1-u)) with
    Jacobian (1-u); an n-by-n Gauss-Legendre grid then integrates any
    polynomial of total degree at most 2n-2 exactly and smooth integrands
    to near machine precision for moderate n.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    pts = np.stack([U.ravel(), (V * (1.0 - U)).ravel()], axis=1)
    wts = (WU * WV * (1.0 - U)).ravel()
    return pts, wts


def map_to_triangle(vertices: np.ndarray, triangles: np.ndarray, pts: np.ndarray, wts: np.ndarray):
    """Push a reference rule onto every triangle of a mesh.

    Returns (x, w) with x of shape (nt, nq, 2) and w of shape (nt, nq);
    per-triangle weights sum to the triangle area.
    """
    p = vertices[triangles]
    v0 = p[:, 0]
    j1 = p[:, 1] - p[:, 0]
    j2 = p[:, 2] - p[:, 0]
    x = v0[:, None, :] + pts[None, :, 0, None] * j1[:, None, :] + pts[None, :, 1, None] * j2[:, None, :]
    det = j1[:, 0] * j2[:, 1] - j1[:, 1] * j2[:, 0]
    w = wts[None, :] * det[:, None]
    return x, w
