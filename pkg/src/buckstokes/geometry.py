"""Parametric planar domains and deterministic triangular meshing.

Domains are bounded, Lipschitz, simply connected open sets described by a
small set of parametric families: discs, ellipses, axis-aligned rectangles,
and star-shaped regions whose boundary radius is a cosine series.  Meshes
are conforming triangulations built from a structured concentric-ring
triangulation of the unit disc (rectangles use a structured grid), with
boundary vertices placed on the exact boundary curve and the boundary
parameter retained for trace integrals.  Construction is deterministic:
the same domain and target mesh size always produce bit-identical meshes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Disc",
    "Ellipse",
    "Rectangle",
    "RadialFourier",
    "Mesh",
    "build_mesh",
    "refine",
    "boundary_arc_measure",
    "domain_area",
    "domain_from_dict",
    "domain_to_dict",
    "mesh_to_json",
]


# ---------------------------------------------------------------------------
# domain specifications


@dataclass(frozen=True)
class Disc:
    """Open disc of the given radius, centered at the origin."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError(f"disc radius must be positive, got {self.radius}")

    @property
    def kind(self) -> str:
        return "disc"

    @property
    def param_period(self) -> float:
        return 2.0 * math.pi

    def boundary_point(self, t):
        """Point on the circle at polar angle t (scalar or array)."""
        t = np.asarray(t, dtype=float)
        return np.stack([self.radius * np.cos(t), self.radius * np.sin(t)], axis=-1)


@dataclass(frozen=True)
class Ellipse:
    """Open ellipse with semi-axes a (horizontal) and b (vertical)."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0):
            raise ValueError(f"ellipse semi-axes must be positive, got ({self.a}, {self.b})")

    @property
    def kind(self) -> str:
        return "ellipse"

    @property
    def param_period(self) -> float:
        return 2.0 * math.pi

    def boundary_point(self, t):
        """Point (a cos t, b sin t) on the ellipse (scalar or array)."""
        t = np.asarray(t, dtype=float)
        return np.stack([self.a * np.cos(t), self.b * np.sin(t)], axis=-1)


@dataclass(frozen=True)
class Rectangle:
    """Open rectangle (0, a) x (0, b)."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0):
            raise ValueError(f"rectangle sides must be positive, got ({self.a}, {self.b})")

    @property
    def kind(self) -> str:
        return "rectangle"

    @property
    def param_period(self) -> float:
        return 2.0 * (self.a + self.b)

    def boundary_point(self, t):
        """Point at arc length t along the perimeter, counterclockwise from (0,0)."""
        a, b = self.a, self.b
        t = np.mod(np.asarray(t, dtype=float), self.param_period)
        x = np.select(
            [t < a, t < a + b, t < 2.0 * a + b],
            [t, a, 2.0 * a + b - t],
            default=0.0,
        )
        y = np.select(
            [t < a, t < a + b, t < 2.0 * a + b],
            [0.0, t - a, b],
            default=2.0 * (a + b) - t,
        )
        return np.stack([x, y], axis=-1)


@dataclass(frozen=True)
class RadialFourier:
    """Star-shaped domain with boundary radius r(t) = R(1 + sum_k c_k cos(kt)).

    The coefficient tuple lists c_1 .. c_K.  The boundary radius must stay
    at or above R/2 everywhere, which keeps the domain star-shaped about
    the origin and simply connected; specs violating that bound are
    rejected at construction (checked on a dense parameter grid).
    """

    radius: float
    coefficients: tuple

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not self.radius > 0.0:
            raise ValueError(f"base radius must be positive, got {self.radius}")
        if any(not math.isfinite(c) for c in self.coefficients):
            raise ValueError("fourier coefficients must be finite")
        t = np.linspace(0.0, 2.0 * math.pi, 4096 * max(1, len(self.coefficients)), endpoint=False)
        rmin = float(np.min(self.boundary_radius(t)))
        if rmin < 0.5 * self.radius:
            raise ValueError(
                f"boundary radius dips to {rmin:.6g} < R/2 = {0.5 * self.radius:.6g}; "
                "domain is not star-shaped enough"
            )

    @property
    def kind(self) -> str:
        return "fourier"

    @property
    def max_mode(self) -> int:
        return len(self.coefficients)

    @property
    def param_period(self) -> float:
        return 2.0 * math.pi

    def boundary_radius(self, t):
        t = np.asarray(t, dtype=float)
        r = np.ones_like(t)
        for k, c in enumerate(self.coefficients, start=1):
            r = r + c * np.cos(k * t)
        return self.radius * r

    def boundary_radius_slope(self, t):
        t = np.asarray(t, dtype=float)
        dr = np.zeros_like(t)
        for k, c in enumerate(self.coefficients, start=1):
            dr = dr - k * c * np.sin(k * t)
        return self.radius * dr

    def boundary_point(self, t):
        """Point r(t) (cos t, sin t) on the boundary curve (scalar or array)."""
        t = np.asarray(t, dtype=float)
        r = self.boundary_radius(t)
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


def _min_feature(domain) -> float:
    if isinstance(domain, Disc):
        return domain.radius
    if isinstance(domain, (Ellipse, Rectangle)):
        return min(domain.a, domain.b)
    if isinstance(domain, RadialFourier):
        return domain.radius
    raise TypeError(f"not a domain spec: {domain!r}")


def _diameter(domain) -> float:
    if isinstance(domain, Disc):
        return 2.0 * domain.radius
    if isinstance(domain, Ellipse):
        return 2.0 * max(domain.a, domain.b)
    if isinstance(domain, Rectangle):
        return math.hypot(domain.a, domain.b)
    if isinstance(domain, RadialFourier):
        return 2.0 * domain.radius * (1.0 + sum(abs(c) for c in domain.coefficients))
    raise TypeError(f"not a domain spec: {domain!r}")


def domain_area(domain) -> float:
    """Exact area of the domain.

    Disc: pi R^2.  Ellipse: pi a b.  Rectangle: a b.  Cosine-series boundary:
    integrating r(t)^2 / 2 and using orthogonality of the cosine modes gives
    pi R^2 (1 + sum_k c_k^2 / 2).
    """
    if isinstance(domain, Disc):
        return math.pi * domain.radius**2
    if isinstance(domain, Ellipse):
        return math.pi * domain.a * domain.b
    if isinstance(domain, Rectangle):
        return domain.a * domain.b
    if isinstance(domain, RadialFourier):
        return math.pi * domain.radius**2 * (1.0 + 0.5 * sum(c * c for c in domain.coefficients))
    raise TypeError(f"not a domain spec: {domain!r}")


def domain_from_dict(d: dict):
    """Build a domain spec from its dict form (inverse of domain_to_dict)."""
    kind = d.get("kind")
    if kind == "disc":
        return Disc(radius=float(d["radius"]))
    if kind == "ellipse":
        return Ellipse(a=float(d["a"]), b=float(d["b"]))
    if kind == "rectangle":
        return Rectangle(a=float(d["a"]), b=float(d["b"]))
    if kind == "fourier":
        return RadialFourier(radius=float(d["radius"]), coefficients=tuple(d["coefficients"]))
    raise ValueError(f"unknown domain kind: {kind!r}")


def domain_to_dict(domain) -> dict:
    if isinstance(domain, Disc):
        return {"kind": "disc", "radius": domain.radius}
    if isinstance(domain, Ellipse):
        return {"kind": "ellipse", "a": domain.a, "b": domain.b}
    if isinstance(domain, Rectangle):
        return {"kind": "rectangle", "a": domain.a, "b": domain.b}
    if isinstance(domain, RadialFourier):
        return {"kind": "fourier", "radius": domain.radius, "coefficients": list(domain.coefficients)}
    raise TypeError(f"not a domain spec: {domain!r}")


# ---------------------------------------------------------------------------
# mesh container


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with exact-boundary parametrization.

    Attributes
    ----------
    domain : domain spec
        The exact domain this mesh approximates; retained so refinement can
        project new boundary vertices onto the true curve.
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Positively oriented vertex triples.
    boundary_loop : (nb,) int array
        Boundary vertex indices in counterclockwise order.
    boundary_param : (nb,) float array
        Boundary-curve parameter of each loop vertex (angle for curved
        domains, arc length for rectangles).
    boundary_edges : (nb, 2) int array
        Consecutive loop pairs, a single closed simple loop.
    h : float
        Maximum edge length.

    Meshes are immutable after construction (arrays are write-protected)
    and safe to share read-only across threads.
    """

    domain: object
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loop: np.ndarray
    boundary_param: np.ndarray
    boundary_edges: np.ndarray
    h: float


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _max_edge_length(vertices: np.ndarray, triangles: np.ndarray) -> float:
    p = vertices[triangles]
    e = np.concatenate([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
    return float(np.max(np.hypot(e[:, 0], e[:, 1])))


def _signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


def _validate_mesh(mesh: Mesh) -> None:
    areas = _signed_areas(mesh.vertices, mesh.triangles)
    if not np.all(areas > 0.0):
        raise ValueError("mesh invariant violated: non-positive triangle orientation")
    # conformity: every edge in one or two triangles, the single-triangle
    # edges being exactly the declared boundary loop
    pairs = np.sort(mesh.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
    edges, counts = np.unique(pairs, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise ValueError("mesh invariant violated: edge shared by more than two triangles")
    declared = np.sort(mesh.boundary_edges, axis=1)
    declared = declared[np.lexsort((declared[:, 1], declared[:, 0]))]
    found = edges[counts == 1]
    if found.shape != declared.shape or not np.array_equal(found, declared):
        raise ValueError("mesh invariant violated: boundary edges do not match triangle boundary")
    loop = mesh.boundary_loop
    if len(set(loop.tolist())) != loop.size:
        raise ValueError("mesh invariant violated: boundary loop revisits a vertex")
    # counterclockwise loop: positive signed area of the boundary polygon
    p = mesh.vertices[loop]
    q = np.roll(p, -1, axis=0)
    if 0.5 * float(np.sum(p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0])) <= 0.0:
        raise ValueError("mesh invariant violated: boundary loop is not counterclockwise")
    exact = mesh.domain.boundary_point(mesh.boundary_param)
    gap = np.hypot(*(mesh.vertices[loop] - exact).T)
    if float(np.max(gap)) > 1e-12 * _diameter(mesh.domain):
        raise ValueError("mesh invariant violated: boundary vertex off the exact curve")


def _make_mesh(domain, vertices, triangles, loop, params) -> Mesh:
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    loop = np.ascontiguousarray(loop, dtype=np.int64)
    params = np.ascontiguousarray(params, dtype=float)
    edges = np.stack([loop, np.roll(loop, -1)], axis=1)
    mesh = Mesh(
        domain=domain,
        vertices=_freeze(vertices),
        triangles=_freeze(triangles),
        boundary_loop=_freeze(loop),
        boundary_param=_freeze(params),
        boundary_edges=_freeze(edges),
        h=_max_edge_length(vertices, triangles),
    )
    _validate_mesh(mesh)
    return mesh


# ---------------------------------------------------------------------------
# structured unit-disc reference triangulation

def _reference_disc(m: int):
    """Concentric-ring triangulation of the unit disc with m rings.

    Ring j (1 <= j <= m) carries 6j vertices at radius j/m, equally spaced
    in angle starting at angle 0; ring 0 is the center vertex.  Vertices are
    ordered ring by ring and by angle within each ring, which fixes the
    connectivity and makes rebuilds bit-identical.  Returns polar
    coordinates so domain maps can be applied without recovering angles
    from cartesian points.
    """
    rho = [np.zeros(1)]
    theta = [np.zeros(1)]
    ring_start = [0]
    n = 1
    for j in range(1, m + 1):
        ring_start.append(n)
        theta.append(2.0 * np.pi * np.arange(6 * j) / (6 * j))
        rho.append(np.full(6 * j, j / m))
        n += 6 * j
    rho = np.concatenate(rho)
    theta = np.concatenate(theta)

    tris = [np.array([[0, 1 + i, 1 + (i + 1) % 6] for i in range(6)], dtype=np.int64)]
    for j in range(1, m):
        rj, ro = ring_start[j], ring_start[j + 1]
        nj, no = 6 * j, 6 * (j + 1)
        for s in range(6):
            i = np.arange(j + 1)
            up = np.stack(
                [rj + (s * j + i) % nj, ro + (s * (j + 1) + i) % no, ro + (s * (j + 1) + i + 1) % no],
                axis=1,
            )
            i = np.arange(j)
            down = np.stack(
                [rj + (s * j + i) % nj, ro + (s * (j + 1) + i + 1) % no, rj + (s * j + i + 1) % nj],
                axis=1,
            )
            tris.append(up)
            tris.append(down)
    triangles = np.concatenate(tris)
    loop = ring_start[m] + np.arange(6 * m, dtype=np.int64)
    theta_loop = 2.0 * np.pi * np.arange(6 * m) / (6 * m)
    return rho, theta, triangles, loop, theta_loop


def _map_polar(domain, rho, theta) -> np.ndarray:
    """Map reference polar coordinates into the physical domain."""
    if isinstance(domain, Disc):
        r = domain.radius * rho
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
    if isinstance(domain, Ellipse):
        return np.stack([domain.a * rho * np.cos(theta), domain.b * rho * np.sin(theta)], axis=-1)
    if isinstance(domain, RadialFourier):
        r = rho * domain.boundary_radius(theta)
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
    raise TypeError(f"polar map undefined for {domain!r}")


def _boundary_stretch(domain) -> float:
    """Upper bound on the metric stretch of the polar map, for ring sizing."""
    if isinstance(domain, Disc):
        return domain.radius
    if isinstance(domain, Ellipse):
        return max(domain.a, domain.b)
    if isinstance(domain, RadialFourier):
        t = np.linspace(0.0, 2.0 * math.pi, 4096 * max(1, domain.max_mode), endpoint=False)
        r = domain.boundary_radius(t)
        dr = domain.boundary_radius_slope(t)
        return float(np.max(np.hypot(r, dr)))
    raise TypeError(f"polar map undefined for {domain!r}")


def _build_mapped(domain, m: int) -> Mesh:
    rho, theta, triangles, loop, theta_loop = _reference_disc(m)
    vertices = _map_polar(domain, rho, theta)
    return _make_mesh(domain, vertices, triangles, loop, theta_loop)


def _build_rectangle(domain: Rectangle, target_h: float) -> Mesh:
    a, b = domain.a, domain.b
    nx = max(1, math.ceil(a / target_h))
    ny = max(1, math.ceil(b / target_h))
    xs = np.linspace(0.0, a, nx + 1)
    ys = np.linspace(0.0, b, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        i = np.arange(nx)
        v00 = vid(i, j)
        v10 = vid(i + 1, j)
        v01 = vid(i, j + 1)
        v11 = vid(i + 1, j + 1)
        tris.append(np.stack([v00, v10, v11], axis=1))
        tris.append(np.stack([v00, v11, v01], axis=1))
    triangles = np.concatenate(tris)

    loop = np.concatenate(
        [
            vid(np.arange(nx + 1), 0),
            vid(nx, np.arange(1, ny + 1)),
            vid(np.arange(nx - 1, -1, -1), ny),
            vid(0, np.arange(ny - 1, 0, -1)),
        ]
    )
    params = np.concatenate(
        [
            xs,
            a + ys[1:],
            a + b + (a - xs[nx - 1 :: -1]),
            2.0 * a + b + (b - ys[ny - 1 : 0 : -1]),
        ]
    )
    return _make_mesh(domain, vertices, triangles, loop, params)


def build_mesh(domain, target_h: float) -> Mesh:
    """Triangulate the domain with maximum edge length at most 1.5 target_h.

    Parameters
    ----------
    domain : Disc, Ellipse, Rectangle, or RadialFourier
    target_h : float
        Requested mesh size; must satisfy target_h <= R/4 (disc, cosine
        boundary) or min(a, b)/4 (ellipse, rectangle) so the mesh resolves
        the smallest feature of the domain.

    Returns
    -------
    Mesh
        Boundary vertices lie on the exact curve; triangle orientation is
        positive; the boundary loop runs counterclockwise.
    """
    if not (target_h > 0.0 and math.isfinite(target_h)):
        raise ValueError(f"target_h must be positive and finite, got {target_h}")
    if target_h > 0.25 * _min_feature(domain):
        raise ValueError(
            f"target_h = {target_h} too coarse for this domain; "
            f"need target_h <= {0.25 * _min_feature(domain):.6g}"
        )
    if isinstance(domain, Rectangle):
        return _build_rectangle(domain, target_h)
    # rings sized so the worst edge (the ring-to-ring diagonal, about 1.45x
    # the radial spacing) comes out near target_h rather than merely under
    # the 1.5x bound
    m = max(4, math.ceil(1.45 * _boundary_stretch(domain) / target_h))
    while True:
        mesh = _build_mapped(domain, m)
        if mesh.h <= 1.5 * target_h:
            return mesh
        m += max(1, m // 4)


def refine(mesh: Mesh) -> Mesh:
    """Uniform red refinement: each triangle splits into four.

    Edge midpoints become new vertices (numbered after the existing ones in
    lexicographic edge order), and midpoints of boundary edges are projected
    onto the exact boundary curve at the parameter midpoint, so the maximum
    edge length halves up to the boundary-projection perturbation.
    """
    V, T = mesh.vertices, mesh.triangles
    nv, nt = V.shape[0], T.shape[0]
    pairs = np.sort(T[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    mid = 0.5 * (V[edges[:, 0]] + V[edges[:, 1]])

    # boundary midpoints: split the parameter interval, then evaluate the
    # exact curve (interval measured forward along the loop, modulo period)
    period = mesh.domain.param_period
    edge_of = {(int(a), int(c)): k for k, (a, c) in enumerate(edges)}
    nb = mesh.boundary_loop.size
    mid_param = np.empty(nb)
    mid_edge = np.empty(nb, dtype=np.int64)
    for i in range(nb):
        v0, v1 = int(mesh.boundary_loop[i]), int(mesh.boundary_loop[(i + 1) % nb])
        t0, t1 = mesh.boundary_param[i], mesh.boundary_param[(i + 1) % nb]
        tm = (t0 + 0.5 * math.fmod(t1 - t0 + period, period)) % period
        k = edge_of[(v0, v1) if v0 < v1 else (v1, v0)]
        mid_param[i] = tm
        mid_edge[i] = k
        mid[k] = mesh.domain.boundary_point(tm)

    vertices = np.concatenate([V, mid])
    m01, m12, m20 = (nv + inverse.reshape(nt, 3)).T
    a, b, c = T[:, 0], T[:, 1], T[:, 2]
    triangles = np.concatenate(
        [
            np.stack([a, m01, m20], axis=1),
            np.stack([b, m12, m01], axis=1),
            np.stack([c, m20, m12], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )
    loop = np.empty(2 * nb, dtype=np.int64)
    params = np.empty(2 * nb)
    loop[0::2] = mesh.boundary_loop
    loop[1::2] = nv + mid_edge
    params[0::2] = mesh.boundary_param
    params[1::2] = mid_param
    return _make_mesh(mesh.domain, vertices, triangles, loop, params)


def boundary_arc_measure(mesh: Mesh) -> np.ndarray:
    """Length of each boundary edge (chord length), in loop order.

    The chord lengths sum to the exact perimeter up to O(h^2), which is the
    accuracy of the polygonal boundary itself; they serve as the arc weights
    for boundary L2 integrals.
    """
    p = mesh.vertices[mesh.boundary_edges[:, 0]]
    q = mesh.vertices[mesh.boundary_edges[:, 1]]
    return np.hypot(*(q - p).T)


def mesh_to_json(mesh: Mesh) -> str:
    """Serialize the mesh connectivity to its JSON document form.

    The document is {"vertices": [[x, y], ...], "triangles": [[i, j, k], ...],
    "boundary": [i0, i1, ...]} with zero-based indices and the boundary loop
    in counterclockwise order.
    """
    doc = {
        "vertices": mesh.vertices.tolist(),
        "triangles": mesh.triangles.tolist(),
        "boundary": mesh.boundary_loop.tolist(),
    }
    return json.dumps(doc)
