"""Experiment runner: resolved configs in, reproducible file payloads out.

Each ``run_*`` function takes an :class:`ExperimentConfig`, drives the
corresponding pipeline (spectra, rigidity sweep, constrained heat evolution,
refinement study, meshing), and returns the outputs as a mapping from file
name to file text plus a small summary dict.  Nothing here touches the file
system; the CLI writes the payloads to disk and the HTTP service returns
them in the response body, so both front ends share one code path.

Determinism contract: with ``jobs == 1`` the payload bytes are a pure
function of the config (JSON is emitted with sorted keys and ``repr`` float
formatting).  ``jobs > 1`` only distributes independent sub-runs across
processes and reassembles them in a fixed order, so the bytes do not change.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .equivalence import build_rigidity_report, domain_id, rigidity_csv, rigidity_report_json
from .evolution import evolution_csv, evolution_json_dict, stokes_heat_evolve
from .geometry import (
    Disc,
    Ellipse,
    RadialFourier,
    Rectangle,
    build_mesh,
    domain_area,
    domain_from_dict,
    domain_to_dict,
    mesh_to_json,
)
from .spectra import (
    buckling_spectrum,
    dirichlet_spectrum,
    richardson,
    spectrum_json_dict,
    stokes_spectrum,
)

__all__ = [
    "ExperimentConfig",
    "RunOutput",
    "domain_from_params",
    "run_spectrum",
    "run_rigidity",
    "run_evolve",
    "run_convergence",
    "run_mesh",
]


def domain_from_params(kind: str, params=()) -> object:
    """Build a domain spec from the flat parameter list used by the front ends.

    disc: () or (radius,); ellipse / rectangle: (a, b); fourier: (radius,
    c1, ..., cK) with the cosine coefficients in harmonic order.
    """
    vals = [float(p) for p in params]
    if kind == "disc":
        if len(vals) > 1:
            raise ValueError("disc takes at most one parameter (radius)")
        return Disc(radius=vals[0] if vals else 1.0)
    if kind == "ellipse":
        if len(vals) != 2:
            raise ValueError("ellipse takes exactly two parameters (a, b)")
        return Ellipse(a=vals[0], b=vals[1])
    if kind == "rectangle":
        if len(vals) != 2:
            raise ValueError("rectangle takes exactly two parameters (a, b)")
        return Rectangle(a=vals[0], b=vals[1])
    if kind == "fourier":
        if len(vals) < 2:
            raise ValueError("fourier takes a radius and at least one cosine coefficient")
        return RadialFourier(radius=vals[0], coefficients=tuple(vals[1:]))
    raise ValueError(f"unknown domain kind: {kind!r}")


@dataclass
class ExperimentConfig:
    """Resolved parameters of one experiment run.

    ``out_dir`` and ``jobs`` are delivery knobs (where files land, how many
    worker processes); they are round-tripped by :meth:`to_dict` but excluded
    from :meth:`resolved_dict`, the form embedded in every output, so that
    the same experiment produces byte-identical files regardless of where it
    is written or how it is parallelized.
    """

    domain: object
    target_h: float = 0.1
    levels: int = 1
    k: int = 3
    tol: float = 1e-9
    nu: float = 1.0
    dt: float | None = None
    horizon: float | None = None
    seed: int = 0
    out_dir: str = "."
    jobs: int = 1

    def __post_init__(self):
        if not self.target_h > 0.0:
            raise ValueError(f"target_h must be positive, got {self.target_h}")
        if self.levels < 1:
            raise ValueError(f"levels must be at least 1, got {self.levels}")
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if not self.nu > 0.0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.dt is not None and not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.horizon is not None and not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {self.jobs}")

    def to_dict(self) -> dict:
        """Lossless dict form (inverse of :meth:`from_dict`)."""
        return {
            "domain": domain_to_dict(self.domain),
            "target_h": self.target_h,
            "levels": self.levels,
            "k": self.k,
            "tol": self.tol,
            "nu": self.nu,
            "dt": self.dt,
            "horizon": self.horizon,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        domain = domain_from_dict(d.pop("domain"))
        return cls(domain=domain, **d)

    def resolved_dict(self) -> dict:
        """Experiment-defining fields only; this is what outputs embed."""
        d = self.to_dict()
        del d["out_dir"]
        del d["jobs"]
        return d


@dataclass
class RunOutput:
    """File payloads (name -> text) plus a summary of the headline numbers."""

    files: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _stamped(doc: dict, config: ExperimentConfig) -> dict:
    out = dict(doc)
    out["config"] = config.resolved_dict()
    out["version"] = __version__
    return out


def _pmap(fn, items, jobs: int):
    """Map preserving order; fans out to processes only when asked to."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# spectrum


_SPECTRUM_DRIVERS = {
    "dirichlet": dirichlet_spectrum,
    "buckling": buckling_spectrum,
    "stokes": stokes_spectrum,
}


def _spectrum_task(args) -> dict:
    kind, domain_dict, h, k, tol, seed = args
    domain = domain_from_dict(domain_dict)
    result = _SPECTRUM_DRIVERS[kind](domain, h, k=k, tol=tol, seed=seed)
    return spectrum_json_dict(result)


def run_spectrum(config: ExperimentConfig) -> RunOutput:
    """Dirichlet, buckling and Stokes spectra at each refinement level.

    Writes one JSON document per (kind, level) and summarizes the finest
    level: lambda1/lambda2 Dirichlet, lambda1 buckling, lambda1 Stokes, and
    the relative Weinstein gap (lambda1B - lambda2D) / lambda2D, all from the
    Richardson-extrapolated values.
    """
    dd = domain_to_dict(config.domain)
    tasks = []
    for level in range(config.levels):
        h = config.target_h / 2.0**level
        for kind in ("dirichlet", "buckling", "stokes"):
            # lambda2D needs two Dirichlet modes even when k = 1.
            k = max(config.k, 2) if kind == "dirichlet" else config.k
            tasks.append((kind, dd, h, k, config.tol, config.seed))
    docs = _pmap(_spectrum_task, tasks, config.jobs)

    files = {}
    finest = {}
    for index, ((kind, *_rest), doc) in enumerate(zip(tasks, docs)):
        level = index // 3
        files[f"spectrum_{kind}_level{level}.json"] = _dump(_stamped(doc, config))
        finest[kind] = doc

    lam1d, lam2d = finest["dirichlet"]["extrapolated"][:2]
    lam1b = finest["buckling"]["extrapolated"][0]
    lam1s = finest["stokes"]["extrapolated"][0]
    summary = {
        "domain": domain_id(config.domain),
        "lambda1_dirichlet": lam1d,
        "lambda2_dirichlet": lam2d,
        "lambda1_buckling": lam1b,
        "lambda1_stokes": lam1s,
        "weinstein_gap": (lam1b - lam2d) / lam2d,
    }
    files["spectrum_summary.json"] = _dump(_stamped(summary, config))
    return RunOutput(files=files, summary=summary)


# ---------------------------------------------------------------------------
# rigidity


def _rigidity_task(args):
    domain_dict, h, tol, seed = args
    return build_rigidity_report(domain_from_dict(domain_dict), h, tol=tol, seed=seed)


_ASPECT_SWEEP = tuple(round(1.0 + 0.1 * i, 10) for i in range(6))


def run_rigidity(config: ExperimentConfig) -> RunOutput:
    """Boundary-rigidity residual sweep.

    For an ellipse the sweep runs over aspect ratios 1.0 to 1.5 in steps of
    0.1 (minor axis fixed at the configured b), exhibiting the dichotomy:
    residuals small only at aspect 1.0.  For every other domain the sweep
    runs over ``levels`` mesh refinements of the configured domain, where a
    disc shows all residual columns decreasing and any other shape floors.
    """
    if isinstance(config.domain, Ellipse):
        b = config.domain.b
        tasks = [
            (domain_to_dict(Ellipse(a=aspect * b, b=b)), config.target_h, config.tol, config.seed)
            for aspect in _ASPECT_SWEEP
        ]
    else:
        dd = domain_to_dict(config.domain)
        tasks = [
            (dd, config.target_h / 2.0**level, config.tol, config.seed)
            for level in range(config.levels)
        ]
    reports = _pmap(_rigidity_task, tasks, config.jobs)

    rows = [rigidity_report_json(r) for r in reports]
    summary = {
        "rows": len(rows),
        "domains": [domain_id(r.domain) for r in reports],
        "dev_boundary_vorticity": [float(r.dev_boundary_vorticity) for r in reports],
        "neumann_pressure_norm": [float(r.neumann_pressure_norm) for r in reports],
    }
    files = {
        "rigidity.csv": rigidity_csv(reports),
        "rigidity_summary.json": _dump(_stamped({"reports": rows}, config)),
    }
    return RunOutput(files=files, summary=summary)


# ---------------------------------------------------------------------------
# evolve


def run_evolve(config: ExperimentConfig) -> RunOutput:
    """Constrained heat evolution started from the first Stokes mode.

    The fitted energy decay rate is reported next to its reference 2 nu
    lambda1S (discrete fine-mesh eigenvalue), together with the transport
    residual and the dissipation margin of the trace.
    """
    result = stokes_spectrum(config.domain, config.target_h, k=1, tol=config.tol, seed=config.seed)
    lam = float(result.eigenvalues[0])
    trace = stokes_heat_evolve(
        result.modes[0].velocity,
        config.nu,
        dt=config.dt,
        T=config.horizon,
        lambda1s=lam,
    )
    doc = evolution_json_dict(trace)
    reference = 2.0 * config.nu * lam
    doc["rate_reference"] = reference
    doc["rate_relative_error"] = abs(trace.decay_rate_fit - reference) / reference
    summary = {
        "domain": domain_id(config.domain),
        "nu": config.nu,
        "dt": doc["dt"],
        "horizon": doc["T"],
        "steps": doc["steps"],
        "decay_rate_fit": trace.decay_rate_fit,
        "rate_reference": reference,
        "rate_relative_error": doc["rate_relative_error"],
        "transport_residual": trace.transport_residual,
        "shape_drift": trace.shape_drift,
        "dissipation_margin": trace.dissipation_margin,
    }
    files = {
        "evolve_trace.csv": evolution_csv(trace),
        "evolve_summary.json": _dump(_stamped(doc, config)),
    }
    return RunOutput(files=files, summary=summary)


# ---------------------------------------------------------------------------
# convergence


def _convergence_task(args):
    quantity, domain_dict, h, tol, seed = args
    domain = domain_from_dict(domain_dict)
    if quantity == "area_defect":
        mesh = build_mesh(domain, h)
        p = mesh.vertices[mesh.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]).sum()
        exact = domain_area(domain)
        return float(mesh.h), abs(area - exact) / exact
    driver = _SPECTRUM_DRIVERS[quantity.removeprefix("lambda1_")]
    result = driver(domain, h, k=1, tol=tol, seed=seed)
    return float(result.h), float(result.eigenvalues[0])


_CONVERGENCE_QUANTITIES = ("lambda1_dirichlet", "lambda1_buckling", "area_defect")


def run_convergence(config: ExperimentConfig) -> RunOutput:
    """Observed convergence orders over ``levels`` >= 3 refinements.

    Eigenvalue errors are measured against the Richardson extrapolation of
    the two finest levels, so the order between the finest pair is fixed by
    construction and is left blank; the area defect has the exact area as
    reference and yields an order at every refinement.
    """
    if config.levels < 3:
        raise ValueError(f"convergence study needs at least 3 levels, got {config.levels}")
    dd = domain_to_dict(config.domain)
    tasks = [
        (quantity, dd, config.target_h / 2.0**level, config.tol, config.seed)
        for quantity in _CONVERGENCE_QUANTITIES
        for level in range(config.levels)
    ]
    measured = _pmap(_convergence_task, tasks, config.jobs)

    lines = ["quantity,level,h,value,error,observed_order"]
    orders_summary = {}
    for qi, quantity in enumerate(_CONVERGENCE_QUANTITIES):
        chunk = measured[qi * config.levels : (qi + 1) * config.levels]
        hs = np.array([h for h, _ in chunk])
        vals = np.array([v for _, v in chunk])
        if quantity == "area_defect":
            errs = vals
            usable = len(errs)  # exact reference: every consecutive pair rates
        else:
            ref = richardson(vals[-2], vals[-1])
            errs = np.abs(vals - ref)
            usable = len(errs) - 1  # last error is 1/3 of the Richardson step
        orders = np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:])
        for level in range(config.levels):
            order = repr(float(orders[level - 1])) if 1 <= level < usable else ""
            row = (quantity, str(level), repr(float(hs[level])), repr(float(vals[level])), repr(float(errs[level])), order)
            lines.append(",".join(row))
        orders_summary[quantity] = float(orders[usable - 2])
    csv_text = "\n".join(lines) + "\n"

    summary = {"domain": domain_id(config.domain), "orders": orders_summary}
    files = {
        "convergence.csv": csv_text,
        "convergence_summary.json": _dump(_stamped(summary, config)),
    }
    return RunOutput(files=files, summary=summary)


# ---------------------------------------------------------------------------
# mesh


def run_mesh(config: ExperimentConfig) -> RunOutput:
    """Triangulate the domain at the target size and emit the connectivity."""
    mesh = build_mesh(config.domain, config.target_h)
    doc = _stamped(json.loads(mesh_to_json(mesh)), config)
    summary = {
        "domain": domain_id(config.domain),
        "vertices": len(doc["vertices"]),
        "triangles": len(doc["triangles"]),
        "boundary": len(doc["boundary"]),
        "h": float(mesh.h),
    }
    return RunOutput(files={"mesh.json": _dump(doc)}, summary=summary)
