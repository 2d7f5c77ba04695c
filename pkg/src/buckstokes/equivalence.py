"""Field transforms and rigidity residuals linking the four eigenproblems.

Everything here measures one obstruction in different coordinates: for the
first buckling mode of a simply connected domain, the boundary trace of the
vorticity is constant, the reconstructed pressure has zero Neumann data,
and h = w + lambda psi is a constant harmonic function -- if and only if
the domain is a disc.  Each functional below is dimensionless (or reported
with the eigenfield normalized to unit L2 norm) so that values are
comparable across domains, mesh sizes, and rigid motions.

Boundary integrals use chord lengths as the arc measure and the element
traces of the fields; normal derivatives are recovered variationally from
the Green identity rather than by differencing one-sided gradients, which
keeps them stable under refinement.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import assembly, quadrature
from .geometry import Mesh, boundary_arc_measure, domain_to_dict
from .solvers import factorize
from .spaces import FieldFunction, P1Space, mesh_edges
from .spectra import buckling_spectrum, curl_of_velocity, vorticity_from_stream

__all__ = [
    "RigidityReport",
    "stream_to_velocity",
    "vorticity",
    "harmonic_h",
    "harmonicity_residual",
    "pressure_from_h",
    "boundary_trace_stats",
    "schiffer_residual",
    "orthogonality_check",
    "h20_membership_check",
    "field_mean_std",
    "build_rigidity_report",
    "rigidity_csv",
    "rigidity_report_json",
    "domain_id",
]

# 3-point Gauss rule on [0, 1]: exact through degree 5, enough for squared
# quadratic traces on an edge
_GAUSS_S = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0

_HARMONIC_DEGREE = 6


def _mesh_area(mesh: Mesh) -> float:
    p = mesh.vertices[mesh.triangles]
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    return float(0.5 * np.sum(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]))


def _l2_norm(field: FieldFunction) -> float:
    m = assembly.assemble_mass(field.space)
    return float(np.sqrt(field.coefficients @ (m @ field.coefficients)))


def field_mean_std(field: FieldFunction) -> tuple:
    """Area-weighted mean and standard deviation of a scalar field."""
    m = assembly.assemble_mass(field.space)
    area = _mesh_area(field.space.mesh)
    c = field.coefficients
    mean = float(np.sum(m @ c)) / area
    var = max(float(c @ (m @ c)) / area - mean * mean, 0.0)
    return mean, float(np.sqrt(var))


def _boundary_edge_tables(mesh: Mesh):
    """Owning triangle and local vertex indices for each directed boundary edge."""
    nv = mesh.vertices.shape[0]
    edges, tri_edges, _ = mesh_edges(mesh)
    owner = np.empty(edges.shape[0], dtype=np.int64)
    for loc in range(3):
        owner[tri_edges[:, loc]] = np.arange(tri_edges.shape[0])
    ab = mesh.boundary_edges
    srt = np.sort(ab, axis=1)
    keys = edges[:, 0] * nv + edges[:, 1]
    eid = np.searchsorted(keys, srt[:, 0] * nv + srt[:, 1])
    tri_ids = owner[eid]
    tri = mesh.triangles[tri_ids]
    ia = np.argmax(tri == ab[:, 0:1], axis=1)
    ib = np.argmax(tri == ab[:, 1:2], axis=1)
    return eid, tri_ids, ia, ib


def _boundary_values(field: FieldFunction, mesh: Mesh) -> np.ndarray:
    """Trace of a P1 or P2 field at the edge Gauss points, (nb, ns)."""
    space = field.space
    ab = mesh.boundary_edges
    c = field.coefficients
    s = _GAUSS_S[None, :]
    if space.kind == "P1":
        return (1.0 - s) * c[ab[:, 0]][:, None] + s * c[ab[:, 1]][:, None]
    if space.kind == "P2":
        nv = mesh.vertices.shape[0]
        eid, _, _, _ = _boundary_edge_tables(mesh)
        return (
            c[ab[:, 0]][:, None] * ((1.0 - s) * (1.0 - 2.0 * s))
            + c[ab[:, 1]][:, None] * (s * (2.0 * s - 1.0))
            + c[nv + eid][:, None] * (4.0 * s * (1.0 - s))
        )
    raise TypeError(f"boundary traces support P1/P2 fields, not {space.kind}")


def _boundary_trace_mass(field_kind: str, mesh: Mesh):
    """Trace mass matrix on the boundary loop and the matching global dofs.

    Returns (mat, dofs): a symmetric positive definite matrix over the
    boundary trace dofs (vertices for P1; vertices plus edge midpoints for
    P2) in loop order, using chord lengths as the arc measure.
    """
    loop = mesh.boundary_loop
    nb = loop.size
    _, lengths = _boundary_normals(mesh)
    nxt = np.roll(np.arange(nb), -1)
    if field_kind == "P1":
        rows = np.concatenate([np.arange(nb), nxt, np.arange(nb), nxt])
        cols = np.concatenate([np.arange(nb), nxt, nxt, np.arange(nb)])
        vals = np.concatenate([lengths / 3.0, lengths / 3.0, lengths / 6.0, lengths / 6.0])
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(nb, nb)).tocsc()
        return mat, loop
    if field_kind == "P2":
        nv = mesh.vertices.shape[0]
        eid, _, _, _ = _boundary_edge_tables(mesh)
        mids = nb + np.arange(nb)
        local = np.stack([np.arange(nb), nxt, mids], axis=1)  # (a, b, mid) per edge
        ref = np.array([[4.0, -1.0, 2.0], [-1.0, 4.0, 2.0], [2.0, 2.0, 16.0]]) / 30.0
        rows = np.repeat(local, 3, axis=1).ravel()
        cols = np.tile(local, (1, 3)).ravel()
        vals = (lengths[:, None, None] * ref[None, :, :]).ravel()
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(2 * nb, 2 * nb)).tocsc()
        return mat, np.concatenate([loop, nv + eid])
    raise TypeError(f"boundary traces support P1/P2 fields, not {field_kind}")


def _normal_flux_norm(w: FieldFunction, lam: float, mesh: Mesh) -> float:
    """L2 boundary norm of dw/dn, recovered variationally.

    Uses the Green identity with the Helmholtz relation Lap w = -lam w that
    the eigenfields satisfy: the boundary functional F[phi] = a(w, phi) -
    lam (w, phi) equals the flux pairing, and its Riesz representative in
    the boundary trace metric gives the norm.  This is far more stable
    under refinement than differencing one-sided gradients.
    """
    space = w.space
    k = assembly.assemble_stiffness(space)
    m = assembly.assemble_mass(space)
    f = k @ w.coefficients - lam * (m @ w.coefficients)
    mat, dofs = _boundary_trace_mass(space.kind, mesh)
    fb = f[dofs]
    g = factorize(mat).solve(fb)
    return float(np.sqrt(max(g @ fb, 0.0)))


def _harmonic_extension_flux(h: FieldFunction, mesh: Mesh) -> float:
    """L2 boundary norm of dh/dn via the discrete harmonic extension.

    Extends the boundary trace of h harmonically into the interior and reads
    the Galerkin flux functional F[phi] = a(h_ext, phi) at the boundary test
    functions; Riesz representation in the boundary trace metric gives the
    norm.  Because the extension satisfies the interior equations exactly,
    the flux carries none of the interior consistency error of a recovered
    field, only the trace error.
    """
    space = h.space
    k = assembly.assemble_stiffness(space)
    bnd = space.boundary_dofs
    free = assembly.free_dofs(space.dof_count, bnd)
    ext = np.zeros(space.dof_count)
    ext[bnd] = h.coefficients[bnd]
    rhs = -(assembly.restrict(k, free, bnd) @ ext[bnd])
    ext[free] = factorize(assembly.restrict(k, free).tocsc()).solve(rhs)
    f = k @ ext
    mat, dofs = _boundary_trace_mass(space.kind, mesh)
    fb = f[dofs]
    g = factorize(mat).solve(fb)
    return float(np.sqrt(max(g @ fb, 0.0)))


def _boundary_normals(mesh: Mesh):
    ab = mesh.boundary_edges
    t = mesh.vertices[ab[:, 1]] - mesh.vertices[ab[:, 0]]
    lengths = np.hypot(t[:, 0], t[:, 1])
    t = t / lengths[:, None]
    # counterclockwise loop: outward normal is the tangent rotated clockwise
    return np.stack([t[:, 1], -t[:, 0]], axis=1), lengths


def stream_to_velocity(psi: FieldFunction) -> tuple:
    """Velocity (ux, uy) = (-d psi/dy, d psi/dx) as P1 projections.

    The orientation makes the curl of u equal the Laplacian of psi, so the
    vorticity of the recovered flow is exactly the buckling-mode vorticity.
    """
    p1 = P1Space(psi.space.mesh)
    m = factorize(assembly.assemble_mass(p1).tocsc())
    cx = assembly.assemble_partial_pairing(p1, psi.space, axis=0)
    cy = assembly.assemble_partial_pairing(p1, psi.space, axis=1)
    ux = FieldFunction(p1, m.solve(-(cy @ psi.coefficients)))
    uy = FieldFunction(p1, m.solve(cx @ psi.coefficients))
    return ux, uy


def vorticity(ux: FieldFunction, uy: FieldFunction) -> FieldFunction:
    """P1 projection of the curl d(uy)/dx - d(ux)/dy of a P1 or P2 velocity."""
    return curl_of_velocity(ux, uy)


def harmonic_h(psi: FieldFunction, lam: float, w: FieldFunction | None = None) -> FieldFunction:
    """Harmonic reconstruction h = w + lambda psi as a P1 field.

    psi is a clamped stream function with eigenvalue lam; w is its weak
    Laplacian (recovered here when not supplied).
    """
    if w is None:
        w = vorticity_from_stream(psi)
    nv = psi.space.mesh.vertices.shape[0]
    return FieldFunction(w.space, w.coefficients + lam * psi.coefficients[:nv])


def harmonicity_residual(h: FieldFunction, layers: int = 3) -> float:
    """Relative L2 distance from h to a discretely harmonic field.

    The Laplacian residual r = (K h), restricted to hat functions at graph
    distance >= `layers` from the boundary, is lifted through the stiffness
    on that set, d = K^-1 r, which is the gap between h and the discrete
    harmonic field agreeing with it near the boundary; the value reported is
    the L2 norm of d over the L2 norm of h.  Zero iff h is discretely
    harmonic away from the boundary.  Recovered vorticities carry an O(1)
    trace layer of width ~h whose lifting decays slower than first order;
    excluding a few vertex rings restores the clean interior rate while the
    excluded strip itself shrinks with the mesh.
    """
    space = h.space
    mesh = space.mesh
    k = assembly.assemble_stiffness(space)
    m = assembly.assemble_mass(space)
    excluded = np.zeros(space.dof_count, dtype=bool)
    excluded[space.boundary_dofs] = True
    for _ in range(layers - 1):
        touched = excluded[mesh.triangles].any(axis=1)
        excluded[mesh.triangles[touched].ravel()] = True
    free = np.nonzero(~excluded)[0]
    if free.size == 0:
        raise ValueError("mesh too coarse: boundary layers cover every vertex")
    r = (k @ h.coefficients)[free]
    d = np.zeros(space.dof_count)
    d[free] = factorize(assembly.restrict(k, free).tocsc()).solve(r)
    num = float(np.sqrt(max(d @ (m @ d), 0.0)))
    den = _l2_norm(h)
    return num / den if den > 0.0 else 0.0


@dataclass
class PressureGradient:
    """Rotated-gradient pressure field: grad p = (dh/dy, -dh/dx)."""

    px: FieldFunction
    py: FieldFunction
    neumann_norm: float  # L2(boundary) norm of dp/dn = dh/ds


def pressure_from_h(h: FieldFunction, mesh: Mesh) -> PressureGradient:
    """Pressure gradient from the conjugate relation grad p = (dh/dy, -dh/dx).

    The Neumann data dp/dn on the boundary equals the tangential derivative
    of h along it, so the boundary norm is computed directly from the trace
    of h without solving a pressure Poisson problem.
    """
    p1 = P1Space(mesh)
    m = factorize(assembly.assemble_mass(p1).tocsc())
    cx = assembly.assemble_partial_pairing(p1, h.space, axis=0)
    cy = assembly.assemble_partial_pairing(p1, h.space, axis=1)
    px = FieldFunction(p1, m.solve(cy @ h.coefficients))
    py = FieldFunction(p1, m.solve(-(cx @ h.coefficients)))
    ab = mesh.boundary_edges
    _, lengths = _boundary_normals(mesh)
    dh_ds = (h.coefficients[ab[:, 1]] - h.coefficients[ab[:, 0]]) / lengths
    neumann = float(np.sqrt(np.sum(lengths * dh_ds**2)))
    return PressureGradient(px=px, py=py, neumann_norm=neumann)


def boundary_trace_stats(w: FieldFunction, mesh: Mesh) -> tuple:
    """Arc-weighted boundary mean, spread, and normalized deviation of w.

    dev = spread / (domain RMS of w); zero exactly for a constant trace,
    invariant under scaling of the field and of the domain.
    """
    vals = _boundary_values(w, mesh)
    _, lengths = _boundary_normals(mesh)
    wts = lengths[:, None] * _GAUSS_W[None, :]
    total = float(np.sum(wts))
    mean = float(np.sum(wts * vals)) / total
    spread = float(np.sqrt(np.sum(wts * (vals - mean) ** 2) / total))
    rms = _l2_norm(w) / np.sqrt(_mesh_area(mesh))
    dev = spread / rms if rms > 0.0 else 0.0
    return mean, spread, dev


def schiffer_residual(
    w: FieldFunction, lam: float, mesh: Mesh, psi: FieldFunction | None = None
) -> tuple:
    """Residual pair of the overdetermined boundary conditions on w.

    Returns (dev_const, neumann_norm): the normalized constancy deviation of
    the boundary trace, and the absolute L2 boundary norm of the variational
    normal derivative after scaling w to unit L2 norm.  Both vanish together
    only when the eigenfield satisfies the overdetermined pair.

    For a Galerkin eigenfield of the Helmholtz relation (psi omitted) the
    flux is read from F[phi] = a(w, phi) - lam (w, phi).  A vorticity
    recovered from a clamped stream function does not satisfy those
    equations discretely and that flux stalls; there the clamping gives
    dw/dn = dh/dn for the harmonic reconstruction h = w + lam psi, whose
    extension flux converges, so pass psi in that case.
    """
    norm = _l2_norm(w)
    if norm == 0.0:
        return 0.0, 0.0
    scaled = FieldFunction(w.space, w.coefficients / norm)
    _, _, dev = boundary_trace_stats(scaled, mesh)
    if psi is None:
        neumann = _normal_flux_norm(scaled, lam, mesh)
    else:
        h = harmonic_h(psi, lam, w=w)
        hs = FieldFunction(h.space, h.coefficients / norm)
        neumann = _harmonic_extension_flux(hs, mesh)
    return dev, neumann


def _element_quadrature(mesh: Mesh, order: int = 8):
    pts, wts = quadrature.rule_collapsed(order)
    phys, weights = quadrature.map_to_triangle(mesh.vertices, mesh.triangles, pts, wts)
    return phys, weights


def _complex_moments(values: np.ndarray, phys: np.ndarray, weights: np.ndarray, degree: int):
    """Pairings of a sampled field with centered harmonic polynomials z^m.

    Grouping the real/imaginary parts per degree into a complex modulus makes
    the result exactly invariant under rigid rotations of the configuration.
    Returns (pairings, poly_norms) for m = 0 .. degree.
    """
    area = float(np.sum(weights))
    cx = float(np.sum(weights * phys[:, :, 0])) / area
    cy = float(np.sum(weights * phys[:, :, 1])) / area
    z = (phys[:, :, 0] - cx) + 1j * (phys[:, :, 1] - cy)
    pairings, norms = [], []
    zm = np.ones_like(z)
    for m in range(degree + 1):
        pairings.append(complex(np.sum(weights * values * zm)))
        norms.append(float(np.sqrt(np.sum(weights * np.abs(zm) ** 2))))
        zm = zm * z
    return pairings, norms


def orthogonality_check(w: FieldFunction, degree: int = _HARMONIC_DEGREE) -> float:
    """Largest normalized pairing of w with harmonic polynomials through degree K.

    max_m |integral of w z^m| / (||w|| ||z^m||) with z centered at the mesh
    centroid; near zero iff w is L2-orthogonal to low-degree harmonics.
    """
    from .spaces import evaluate_on_elements

    mesh = w.space.mesh
    pts, _ = quadrature.rule_collapsed(8)
    phys, weights = _element_quadrature(mesh)
    vals = evaluate_on_elements(w, pts)
    norm_w = float(np.sqrt(np.sum(weights * vals**2)))
    if norm_w == 0.0:
        return 0.0
    pairings, norms = _complex_moments(vals, phys, weights, degree)
    return max(abs(c) / (norm_w * n) for c, n in zip(pairings, norms))


def h20_membership_check(psi: FieldFunction, degree: int = _HARMONIC_DEGREE) -> float:
    """Test whether a zero-trace field has zero normal slope via harmonic pairings.

    Computes max_m |integral of z^m Lap psi| normalized by the norms of both
    factors; the piecewise Laplacian of the quadratic element is constant per
    triangle.  Near zero for clamped fields, order one when the normal
    derivative does not vanish.
    """
    from .spaces import morley_second_derivatives

    mesh = psi.space.mesh
    second = morley_second_derivatives(psi)
    lap = second[:, 0] + second[:, 2]
    phys, weights = _element_quadrature(mesh)
    vals = np.broadcast_to(lap[:, None], weights.shape)
    norm_lap = float(np.sqrt(np.sum(weights * vals**2)))
    if norm_lap == 0.0:
        return 0.0
    pairings, norms = _complex_moments(vals, phys, weights, degree)
    return max(abs(c) / (norm_lap * n) for c, n in zip(pairings, norms))


@dataclass
class RigidityReport:
    """Scalar residuals of the overdetermined conditions for one domain.

    All entries are nonnegative and dimensionless (the eigenfield is scaled
    to unit L2 norm first); every one of them converges to zero under
    refinement exactly when the domain is a disc.
    """

    domain: object
    h: float
    lam: float
    dev_boundary_vorticity: float
    neumann_pressure_norm: float
    schiffer_dev: float
    schiffer_dn: float
    harmonicity_residual: float
    ortho_residual: float

    def __post_init__(self):
        for name in (
            "dev_boundary_vorticity",
            "neumann_pressure_norm",
            "schiffer_dev",
            "schiffer_dn",
            "harmonicity_residual",
            "ortho_residual",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"residual {name} must be nonnegative")


def _neumann_pressure_scaled(h_field: FieldFunction, w_norm: float, mesh: Mesh) -> float:
    """Neumann pressure residual scaled to match the vorticity deviation.

    A boundary trace varying like the second angular mode has
    RMS(dh/ds) * perimeter / (4 pi) equal to its spread, so this scaling puts
    the Neumann residual on the same footing as dev_boundary_vorticity.
    """
    grad = pressure_from_h(h_field, mesh)
    _, lengths = _boundary_normals(mesh)
    perimeter = float(np.sum(lengths))
    area = _mesh_area(mesh)
    rms_w = w_norm / np.sqrt(area)
    return grad.neumann_norm / np.sqrt(perimeter) * (perimeter / (4.0 * np.pi)) / rms_w


def build_rigidity_report(domain, h: float, tol: float = 1e-9, seed: int = 0) -> RigidityReport:
    """Rigidity residuals of the first buckling mode on one domain."""
    res = buckling_spectrum(domain, h, k=1, tol=tol, seed=seed)
    return rigidity_from_mode(res)


def rigidity_from_mode(res) -> RigidityReport:
    """Rigidity residuals from an already computed buckling spectrum result."""
    mode = res.modes[0]
    lam = float(res.eigenvalues[0])
    mesh = res.mesh
    psi, w = mode.psi, mode.vorticity
    w_norm = _l2_norm(w)
    _, _, dev = boundary_trace_stats(w, mesh)
    h_field = harmonic_h(psi, lam, w=w)
    neumann = _neumann_pressure_scaled(h_field, w_norm, mesh)
    sdev, sdn = schiffer_residual(w, lam, mesh, psi=psi)
    harm = harmonicity_residual(h_field)
    ortho = orthogonality_check(w)
    return RigidityReport(
        domain=res.domain,
        h=res.h,
        lam=lam,
        dev_boundary_vorticity=dev,
        neumann_pressure_norm=neumann,
        schiffer_dev=sdev,
        schiffer_dn=sdn,
        harmonicity_residual=harm,
        ortho_residual=ortho,
    )


def domain_id(domain) -> str:
    kind = domain.kind
    if kind == "disc":
        return f"disc-{domain.radius:g}"
    if kind == "ellipse":
        return f"ellipse-{domain.a:g}x{domain.b:g}"
    if kind == "rectangle":
        return f"rectangle-{domain.a:g}x{domain.b:g}"
    if kind == "fourier":
        coeffs = ",".join(f"{c:g}" for c in domain.coefficients)
        return f"fourier-{domain.radius:g}-[{coeffs}]"
    raise ValueError(f"unknown domain kind {kind!r}")


_CSV_COLUMNS = (
    "domain-id",
    "h",
    "lambda",
    "dev_w",
    "neumann_p",
    "schiffer_dev",
    "schiffer_dn",
    "harm_res",
    "ortho_res",
)


def rigidity_csv(reports) -> str:
    """CSV table of rigidity reports, one row per domain."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for r in reports:
        writer.writerow(
            [
                domain_id(r.domain),
                repr(float(r.h)),
                repr(float(r.lam)),
                repr(float(r.dev_boundary_vorticity)),
                repr(float(r.neumann_pressure_norm)),
                repr(float(r.schiffer_dev)),
                repr(float(r.schiffer_dn)),
                repr(float(r.harmonicity_residual)),
                repr(float(r.ortho_residual)),
            ]
        )
    return buf.getvalue()


def rigidity_report_json(report: RigidityReport) -> dict:
    return {
        "domain": domain_to_dict(report.domain),
        "h": float(report.h),
        "lambda": float(report.lam),
        "dev_boundary_vorticity": float(report.dev_boundary_vorticity),
        "neumann_pressure_norm": float(report.neumann_pressure_norm),
        "schiffer_residual": [float(report.schiffer_dev), float(report.schiffer_dn)],
        "harmonicity_residual": float(report.harmonicity_residual),
        "ortho_residual": float(report.ortho_residual),
    }
