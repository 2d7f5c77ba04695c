"""Experiment runner: config round-trips, payload shapes, determinism."""

import json

import pytest

from buckstokes.equivalence import _CSV_COLUMNS
from buckstokes.geometry import Disc, Ellipse, Rectangle
from buckstokes.runner import (
    ExperimentConfig,
    domain_from_params,
    run_convergence,
    run_evolve,
    run_mesh,
    run_rigidity,
    run_spectrum,
)

DISC = Disc(radius=1.0)


def make_config(**kwargs):
    kwargs.setdefault("domain", DISC)
    kwargs.setdefault("target_h", 0.25)
    return ExperimentConfig(**kwargs)


# ---------------------------------------------------------------------------
# config


def test_domain_from_params_conventions():
    assert domain_from_params("disc") == Disc(radius=1.0)
    assert domain_from_params("disc", (2.0,)) == Disc(radius=2.0)
    assert domain_from_params("ellipse", (1.5, 1.0)) == Ellipse(a=1.5, b=1.0)
    assert domain_from_params("rectangle", (2, 1)) == Rectangle(a=2.0, b=1.0)
    fourier = domain_from_params("fourier", (1.0, 0.0, 0.0, 0.12))
    assert fourier.radius == 1.0 and fourier.coefficients == (0.0, 0.0, 0.12)


@pytest.mark.parametrize(
    "kind, params",
    [("disc", (1.0, 2.0)), ("ellipse", (1.0,)), ("rectangle", ()), ("fourier", (1.0,)), ("blob", ())],
)
def test_domain_from_params_rejects_bad_arity(kind, params):
    with pytest.raises(ValueError):
        domain_from_params(kind, params)


def test_config_round_trip_is_lossless():
    config = make_config(levels=2, k=4, tol=1e-8, nu=0.5, dt=0.01, horizon=0.5,
                         seed=3, out_dir="/tmp/xyz", jobs=2)
    again = ExperimentConfig.from_dict(config.to_dict())
    assert again == config
    assert again.to_dict() == config.to_dict()


def test_resolved_dict_drops_delivery_knobs():
    config = make_config(out_dir="/somewhere", jobs=8)
    resolved = config.resolved_dict()
    assert "out_dir" not in resolved and "jobs" not in resolved
    assert resolved["domain"] == {"kind": "disc", "radius": 1.0}


@pytest.mark.parametrize(
    "field, value",
    [("target_h", 0.0), ("levels", 0), ("k", 0), ("tol", 0.0), ("nu", -1.0),
     ("dt", 0.0), ("horizon", -2.0), ("jobs", 0)],
)
def test_config_validation(field, value):
    with pytest.raises(ValueError):
        make_config(**{field: value})


# ---------------------------------------------------------------------------
# payloads


@pytest.fixture(scope="module")
def disc_spectrum_output():
    return run_spectrum(make_config(k=2))


def test_spectrum_files_and_summary(disc_spectrum_output):
    out = disc_spectrum_output
    expected = {
        "spectrum_dirichlet_level0.json",
        "spectrum_buckling_level0.json",
        "spectrum_stokes_level0.json",
        "spectrum_summary.json",
    }
    assert set(out.files) == expected
    assert abs(out.summary["weinstein_gap"]) < 0.01
    assert out.summary["lambda2_dirichlet"] == pytest.approx(14.6819706, rel=0.01)


def test_spectrum_payloads_embed_config_and_version(disc_spectrum_output):
    for text in disc_spectrum_output.files.values():
        doc = json.loads(text)
        assert doc["version"]
        assert doc["config"]["domain"] == {"kind": "disc", "radius": 1.0}
        assert "out_dir" not in doc["config"]


def test_spectrum_documents_keep_result_fields(disc_spectrum_output):
    doc = json.loads(disc_spectrum_output.files["spectrum_stokes_level0.json"])
    for key in ("domain", "h", "kind", "eigenvalues", "residuals", "extrapolated"):
        assert key in doc
    assert doc["kind"] == "stokes"


def test_spectrum_is_deterministic(disc_spectrum_output):
    again = run_spectrum(make_config(k=2))
    assert again.files == disc_spectrum_output.files


def test_mesh_document(tmp_path):
    out = run_mesh(make_config())
    doc = json.loads(out.files["mesh.json"])
    assert set(doc) == {"vertices", "triangles", "boundary", "config", "version"}
    assert out.summary["vertices"] == len(doc["vertices"])
    assert out.summary["boundary"] == len(doc["boundary"])


def test_rigidity_disc_levels_decrease():
    out = run_rigidity(make_config(target_h=0.2, levels=2))
    assert out.summary["rows"] == 2
    dev = out.summary["dev_boundary_vorticity"]
    assert dev[1] <= dev[0]
    header = out.files["rigidity.csv"].splitlines()[0]
    assert header == ",".join(_CSV_COLUMNS)
    assert len(out.files["rigidity.csv"].splitlines()) == 3


def test_rigidity_ellipse_runs_aspect_sweep():
    out = run_rigidity(ExperimentConfig(domain=Ellipse(a=1.2, b=1.0), target_h=0.2))
    assert out.summary["rows"] == 6
    # aspect 1.0 is a disc in ellipse clothing; aspect 1.5 is decisively not
    dev = out.summary["dev_boundary_vorticity"]
    assert dev[0] <= 0.02
    assert dev[-1] >= 0.1
    assert dev == sorted(dev)


def test_convergence_requires_three_levels():
    with pytest.raises(ValueError):
        run_convergence(make_config(levels=2))


@pytest.fixture(scope="module")
def disc_convergence_output():
    return run_convergence(make_config(levels=3))


def test_convergence_orders(disc_convergence_output):
    orders = disc_convergence_output.summary["orders"]
    assert set(orders) == {"lambda1_dirichlet", "lambda1_buckling", "area_defect"}
    assert orders["lambda1_dirichlet"] >= 1.8
    assert orders["lambda1_buckling"] >= 1.5
    assert orders["area_defect"] == pytest.approx(2.0, abs=0.3)


def test_convergence_csv_shape(disc_convergence_output):
    lines = disc_convergence_output.files["convergence.csv"].splitlines()
    assert lines[0] == "quantity,level,h,value,error,observed_order"
    assert len(lines) == 1 + 3 * 3
    # level-0 rows never carry an order; eigenvalue finest rows are blank too
    for line in lines[1:]:
        fields = line.split(",")
        if fields[1] == "0":
            assert fields[5] == ""
        if fields[0] != "area_defect" and fields[1] == "2":
            assert fields[5] == ""
    area_finest = [l for l in lines if l.startswith("area_defect,2,")][0]
    assert float(area_finest.split(",")[5]) > 1.5


def test_convergence_jobs_do_not_change_bytes(disc_convergence_output):
    parallel = run_convergence(make_config(levels=3, jobs=3))
    assert parallel.files == disc_convergence_output.files


def test_evolve_summary_and_trace():
    out = run_evolve(make_config(target_h=0.2, nu=0.5))
    assert out.summary["rate_relative_error"] <= 0.02
    assert out.summary["dissipation_margin"] >= 0.0
    doc = json.loads(out.files["evolve_summary.json"])
    assert doc["rate_reference"] == pytest.approx(2 * 0.5 * 14.68, rel=0.05)
    lines = out.files["evolve_trace.csv"].splitlines()
    assert lines[0] == "t,E,divergence_residual"
    assert len(lines) == doc["steps"] + 2
