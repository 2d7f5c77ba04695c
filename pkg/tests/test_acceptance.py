"""End-to-end acceptance gate.

Twelve numbered criteria covering the whole toolkit: oracle reproduction of
the disc Dirichlet spectrum, the buckling / Stokes / Dirichlet eigenvalue
relations on and off the disc, harmonicity and rigidity residual behaviour
under refinement, the clamped-membership and harmonic-orthogonality
dichotomies, cellular decay of the constrained heat flow, transport
residuals, CLI byte-determinism, and the discrete clamped integration
identity.  One test per criterion; each prints a single pass/fail line with
the measured numbers next to the pinned tolerance.
"""

import numpy as np
import pytest

from buckstokes.cli import main as cli_main
from buckstokes.equivalence import (
    build_rigidity_report,
    h20_membership_check,
    orthogonality_check,
)
from buckstokes.evolution import stokes_heat_evolve, transport_residual
from buckstokes.geometry import Disc, Ellipse, RadialFourier, Rectangle, build_mesh, refine
from buckstokes.oracles import disc_reference
from buckstokes.spaces import MorleySpace, interpolate_morley, morley_second_derivatives
from buckstokes.spectra import (
    buckling_spectrum,
    constrained_vorticity_first,
    dirichlet_spectrum,
    stokes_spectrum,
)

DISC = Disc(radius=1.0)
SQUARE = Rectangle(a=1.0, b=1.0)
ELLIPSE13 = Ellipse(a=1.3, b=1.0)
ELLIPSE15 = Ellipse(a=1.5, b=1.0)
FOURIER = RadialFourier(radius=1.0, coefficients=(0.0, 0.0, 0.12))

EQUALITY_FAMILY = (("disc", DISC), ("square", SQUARE), ("ellipse13", ELLIPSE13), ("fourier", FOURIER))
RIGIDITY_FAMILY = (("disc", DISC), ("ellipse15", ELLIPSE15), ("square", SQUARE), ("fourier", FOURIER))


def check(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num:02d} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num:02d}: {detail}"


@pytest.fixture(scope="module")
def bessel_ref():
    return disc_reference(1.0)


@pytest.fixture(scope="module")
def disc_dirichlet_desk():
    # fine mesh lands at h ~ 0.024 <= 0.025; extrapolation spans the level pair
    return dirichlet_spectrum(DISC, 0.05, k=2)


@pytest.fixture(scope="module")
def disc_buckling():
    return buckling_spectrum(DISC, 0.1, k=1)


@pytest.fixture(scope="module")
def equality_spectra():
    """Extrapolated lambda1B (Morley) and lambda1S (Taylor-Hood) per domain."""
    out = {}
    for name, domain in EQUALITY_FAMILY:
        lam_b = buckling_spectrum(domain, 0.15, k=1).extrapolated[0]
        res_s = stokes_spectrum(domain, 0.15, k=1)
        out[name] = (lam_b, res_s.extrapolated[0], res_s)
    return out


@pytest.fixture(scope="module")
def rigidity_reports():
    return {
        name: (build_rigidity_report(domain, 0.2), build_rigidity_report(domain, 0.1))
        for name, domain in RIGIDITY_FAMILY
    }


@pytest.fixture(scope="module")
def disc_stokes_levels(equality_spectra):
    return (equality_spectra["disc"][2], stokes_spectrum(DISC, 0.1, k=1))


@pytest.fixture(scope="module")
def ellipse_stokes_levels():
    return (stokes_spectrum(ELLIPSE15, 0.15, k=1), stokes_spectrum(ELLIPSE15, 0.1, k=1))


def test_criterion_01_disc_dirichlet_matches_bessel_oracle(disc_dirichlet_desk, bessel_ref):
    lam1, lam2 = disc_dirichlet_desk.extrapolated[:2]
    err1 = abs(lam1 - bessel_ref.lambda1_dirichlet) / bessel_ref.lambda1_dirichlet
    err2 = abs(lam2 - bessel_ref.lambda2_dirichlet) / bessel_ref.lambda2_dirichlet
    check(
        1,
        disc_dirichlet_desk.h <= 0.025 and err1 <= 0.01 and err2 <= 0.01,
        f"h={disc_dirichlet_desk.h:.4f}, lambda1D err={err1:.2e}, lambda2D err={err2:.2e} (tol 1%)",
    )


def test_criterion_02_weinstein_equality_on_disc(disc_dirichlet_desk, disc_buckling):
    lam2d = disc_dirichlet_desk.extrapolated[1]
    lam1b = disc_buckling.extrapolated[0]
    gap = abs(lam1b - lam2d) / lam2d
    check(2, gap <= 0.01, f"|lambda1B - lambda2D|/lambda2D = {gap:.2e} on the disc (tol 1%)")


def test_criterion_03_weinstein_strict_inequality_off_disc():
    gaps = {}
    for name, domain in (("square", SQUARE), ("ellipse15", ELLIPSE15)):
        lam2d = dirichlet_spectrum(domain, 0.1, k=2).extrapolated[1]
        lam1b = buckling_spectrum(domain, 0.1, k=1).extrapolated[0]
        gaps[name] = (lam1b - lam2d) / lam2d
    detail = ", ".join(f"{n}: gap={g:.3f}" for n, g in gaps.items())
    check(3, all(g >= 0.05 for g in gaps.values()), f"{detail} (floor 5%)")


def test_criterion_04_buckling_equals_stokes_when_simply_connected(equality_spectra):
    errs = {n: abs(b - s) / s for n, (b, s, _) in equality_spectra.items()}
    detail = ", ".join(f"{n}: {e:.2e}" for n, e in errs.items())
    check(4, all(e <= 0.02 for e in errs.values()), f"Morley vs Taylor-Hood rel err {detail} (tol 2%)")


def test_criterion_05_harmonicity_residual_first_order(rigidity_reports):
    orders = {}
    for name, (coarse, fine) in rigidity_reports.items():
        orders[name] = float(
            np.log(coarse.harmonicity_residual / fine.harmonicity_residual)
            / np.log(coarse.h / fine.h)
        )
    detail = ", ".join(f"{n}: order={o:.2f}" for n, o in orders.items())
    check(5, all(o >= 1.0 for o in orders.values()), f"{detail} (floor 1.0)")


def test_criterion_06_rigidity_dichotomy(rigidity_reports):
    disc_c, disc_f = rigidity_reports["disc"]
    ok = (
        disc_f.dev_boundary_vorticity <= 0.02
        and disc_f.neumann_pressure_norm <= 0.02
        and disc_f.dev_boundary_vorticity <= disc_c.dev_boundary_vorticity
        and disc_f.neumann_pressure_norm <= disc_c.neumann_pressure_norm
    )
    parts = [f"disc: dev={disc_f.dev_boundary_vorticity:.4f} neu={disc_f.neumann_pressure_norm:.4f} (cap 0.02, decreasing)"]
    for name in ("ellipse15", "square"):
        coarse, fine = rigidity_reports[name]
        for label, lo, hi in (
            ("dev", coarse.dev_boundary_vorticity, fine.dev_boundary_vorticity),
            ("neu", coarse.neumann_pressure_norm, fine.neumann_pressure_norm),
        ):
            # floors at 0.05; non-decreasing up to a 5% drift toward the refinement limit
            ok = ok and lo >= 0.05 and hi >= 0.05 and hi >= 0.95 * lo
            parts.append(f"{name}.{label}={hi:.3f}")
    check(6, ok, "; ".join(parts) + " (floors 0.05)")


def test_criterion_07_harmonic_orthogonality_of_constrained_mode():
    values = {}
    for h in (0.2, 0.1):
        res = constrained_vorticity_first(DISC, h)
        mode = res.modes[0]
        w = mode.vorticity if mode.vorticity is not None else mode.psi
        values[res.h] = orthogonality_check(w)
    (h_c, v_c), (h_f, v_f) = sorted(values.items(), reverse=True)
    check(
        7,
        h_f <= 0.05 and v_f <= 1e-2 and v_f < v_c,
        f"pairing {v_c:.2e} (h={h_c:.3f}) -> {v_f:.2e} (h={h_f:.3f}) (cap 1e-2, decreasing)",
    )


def test_criterion_08_clamped_membership_dichotomy():
    mesh = build_mesh(DISC, 0.1)
    space = MorleySpace(mesh)

    def clamped(p):
        return (1.0 - p[:, 0] ** 2 - p[:, 1] ** 2) ** 2

    def clamped_grad(p):
        return (-4.0 * (1.0 - p[:, 0] ** 2 - p[:, 1] ** 2))[:, None] * p

    def sloped(p):
        return 1.0 - p[:, 0] ** 2 - p[:, 1] ** 2

    def sloped_grad(p):
        return -2.0 * p

    inside = h20_membership_check(interpolate_morley(space, clamped, clamped_grad))
    outside = h20_membership_check(interpolate_morley(space, sloped, sloped_grad))
    check(
        8,
        inside <= 0.02 and outside >= 0.5,
        f"(1-r^2)^2 membership={inside:.2e} (cap 0.02); 1-r^2 membership={outside:.3f} (floor 0.5)",
    )


def test_criterion_09_cellular_decay_rates(equality_spectra):
    result = equality_spectra["disc"][2]
    lam = float(result.eigenvalues[0])
    parts, ok = [], True
    for nu in (0.5, 1.0):
        trace = stokes_heat_evolve(result.modes[0].velocity, nu, lambda1s=lam)
        reference = 2.0 * nu * lam
        rate_err = abs(trace.decay_rate_fit - reference) / reference
        margin_floor = -1e-3 * trace.energy[0]
        ok = ok and rate_err <= 0.02 and trace.shape_drift <= 0.01 and trace.dissipation_margin >= margin_floor
        parts.append(
            f"nu={nu}: rate err={rate_err:.2e}, shape drift={trace.shape_drift:.2e}, "
            f"margin={trace.dissipation_margin:.2e}"
        )
    check(9, ok, "; ".join(parts) + " (tols 2%, 1%, -1e-3 E0)")


def test_criterion_10_transport_residual_dichotomy(disc_stokes_levels, ellipse_stokes_levels):
    disc_vals = [transport_residual(r.modes[0].velocity) for r in disc_stokes_levels]
    ell_vals = [transport_residual(r.modes[0].velocity) for r in ellipse_stokes_levels]
    ok = (
        disc_vals[1] <= 0.02
        and all(v <= 0.02 for v in disc_vals)
        and all(v >= 0.05 for v in ell_vals)
    )
    check(
        10,
        ok,
        f"disc {disc_vals[0]:.4f} -> {disc_vals[1]:.4f} (cap 0.02); "
        f"ellipse15 {ell_vals[0]:.4f} -> {ell_vals[1]:.4f} (floor 0.05)",
    )


def test_criterion_11_cli_outputs_are_byte_identical(tmp_path):
    runs = [
        ["mesh", "--domain", "fourier", "--params", "1.0,0,0,0.12", "--h", "0.25"],
        ["spectrum", "--domain", "disc", "--h", "0.25", "--k", "1", "--seed", "11"],
        ["evolve", "--domain", "disc", "--h", "0.25", "--nu", "1.0", "--seed", "11"],
    ]
    compared = 0
    for i, args in enumerate(runs):
        dir_a, dir_b = tmp_path / f"a{i}", tmp_path / f"b{i}"
        assert cli_main(args + ["--jobs", "1", "--out", str(dir_a)]) == 0
        assert cli_main(args + ["--jobs", "1", "--out", str(dir_b)]) == 0
        names = sorted(p.name for p in dir_a.iterdir())
        assert names == sorted(p.name for p in dir_b.iterdir())
        for name in names:
            assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes(), name
            compared += 1
    check(11, compared > 0, f"{compared} files byte-identical across repeated seeded runs")


def test_criterion_12_clamped_integration_identity_decays():
    def tilted(p):
        return (1.0 - p[:, 0] ** 2 - p[:, 1] ** 2) ** 2 * (1.0 + 0.5 * p[:, 0])

    def tilted_grad(p):
        s = 1.0 - p[:, 0] ** 2 - p[:, 1] ** 2
        g = (-4.0 * s * (1.0 + 0.5 * p[:, 0]))[:, None] * p
        g[:, 0] += 0.5 * s**2
        return g

    values, hs = [], []
    mesh = build_mesh(DISC, 0.25)
    for _ in range(3):
        psi = interpolate_morley(MorleySpace(mesh), tilted, tilted_grad)
        second = morley_second_derivatives(psi)  # per-element (xx, xy, yy)
        p = mesh.vertices[mesh.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        areas = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        values.append(abs(float(np.sum(areas * (second[:, 1] ** 2 - second[:, 0] * second[:, 2])))))
        hs.append(mesh.h)
        mesh = refine(mesh)
    orders = np.log(np.array(values[:-1]) / np.array(values[1:])) / np.log(
        np.array(hs[:-1]) / np.array(hs[1:])
    )
    check(
        12,
        bool(np.all(orders >= 1.0)),
        f"integral {values[0]:.2e} -> {values[-1]:.2e}, orders {[f'{o:.2f}' for o in orders]} (floor 1.0)",
    )
