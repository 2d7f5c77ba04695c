"""HTTP service exposing the experiment runner.

FastAPI application with one POST endpoint per experiment (spectrum,
rigidity, evolve, convergence, mesh) plus a health probe.  Requests and
responses are pydantic models; each response carries the same file payloads
the CLI would write (name -> text) next to a typed summary, so the service
is a transport around :mod:`buckstokes.runner` and adds no numerics of its
own.

Run with ``uvicorn buckstokes.service:app``.
"""

from __future__ import annotations

from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__, runner
from .solvers import FactorizationError, NonConvergenceError

__all__ = ["app", "create_app"]


class DomainSpec(BaseModel):
    """Domain selector mirroring the CLI flags --domain / --params."""

    kind: Literal["disc", "ellipse", "rectangle", "fourier"]
    params: list[float] = Field(default_factory=list)


class SpectrumRequest(BaseModel):
    domain: DomainSpec
    h: float = 0.1
    levels: int = 1
    k: int = 3
    tol: float = 1e-9
    seed: int = 0
    jobs: int = 1


class RigidityRequest(BaseModel):
    domain: DomainSpec
    h: float = 0.1
    levels: int = 1
    tol: float = 1e-9
    seed: int = 0
    jobs: int = 1


class EvolveRequest(BaseModel):
    domain: DomainSpec
    h: float = 0.1
    nu: float = 1.0
    dt: float | None = None
    horizon: float | None = None
    tol: float = 1e-9
    seed: int = 0


class ConvergenceRequest(BaseModel):
    domain: DomainSpec
    h: float = 0.2
    levels: int = 3
    tol: float = 1e-9
    seed: int = 0
    jobs: int = 1


class MeshRequest(BaseModel):
    domain: DomainSpec
    h: float = 0.1


class SpectrumSummary(BaseModel):
    domain: str
    lambda1_dirichlet: float
    lambda2_dirichlet: float
    lambda1_buckling: float
    lambda1_stokes: float
    weinstein_gap: float


class RigiditySummary(BaseModel):
    rows: int
    domains: list[str]
    dev_boundary_vorticity: list[float]
    neumann_pressure_norm: list[float]


class EvolveSummary(BaseModel):
    domain: str
    nu: float
    dt: float
    horizon: float
    steps: int
    decay_rate_fit: float
    rate_reference: float
    rate_relative_error: float
    transport_residual: float
    shape_drift: float
    dissipation_margin: float


class ConvergenceSummary(BaseModel):
    domain: str
    orders: dict[str, float]


class MeshSummary(BaseModel):
    domain: str
    vertices: int
    triangles: int
    boundary: int
    h: float


class SpectrumResponse(BaseModel):
    summary: SpectrumSummary
    files: dict[str, str]
    version: str


class RigidityResponse(BaseModel):
    summary: RigiditySummary
    files: dict[str, str]
    version: str


class EvolveResponse(BaseModel):
    summary: EvolveSummary
    files: dict[str, str]
    version: str


class ConvergenceResponse(BaseModel):
    summary: ConvergenceSummary
    files: dict[str, str]
    version: str


class MeshResponse(BaseModel):
    summary: MeshSummary
    files: dict[str, str]
    version: str


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str


def _run(fn, domain: DomainSpec, **kwargs) -> runner.RunOutput:
    # Config and mesh preconditions are client errors; solver breakdowns are not.
    try:
        spec = runner.domain_from_params(domain.kind, domain.params)
        config = runner.ExperimentConfig(domain=spec, **kwargs)
        return fn(config)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except (NonConvergenceError, FactorizationError) as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc


def create_app() -> FastAPI:
    app = FastAPI(
        title="buckstokes",
        version=__version__,
        description="Buckling / Stokes / constrained-vorticity spectra and boundary-rigidity diagnostics on parametric planar domains.",
    )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/spectrum", response_model=SpectrumResponse)
    def spectrum(req: SpectrumRequest) -> SpectrumResponse:
        out = _run(runner.run_spectrum, req.domain, target_h=req.h, levels=req.levels,
                   k=req.k, tol=req.tol, seed=req.seed, jobs=req.jobs)
        return SpectrumResponse(summary=SpectrumSummary(**out.summary), files=out.files, version=__version__)

    @app.post("/rigidity", response_model=RigidityResponse)
    def rigidity(req: RigidityRequest) -> RigidityResponse:
        out = _run(runner.run_rigidity, req.domain, target_h=req.h, levels=req.levels,
                   tol=req.tol, seed=req.seed, jobs=req.jobs)
        return RigidityResponse(summary=RigiditySummary(**out.summary), files=out.files, version=__version__)

    @app.post("/evolve", response_model=EvolveResponse)
    def evolve(req: EvolveRequest) -> EvolveResponse:
        out = _run(runner.run_evolve, req.domain, target_h=req.h, nu=req.nu,
                   dt=req.dt, horizon=req.horizon, tol=req.tol, seed=req.seed)
        return EvolveResponse(summary=EvolveSummary(**out.summary), files=out.files, version=__version__)

    @app.post("/convergence", response_model=ConvergenceResponse)
    def convergence(req: ConvergenceRequest) -> ConvergenceResponse:
        out = _run(runner.run_convergence, req.domain, target_h=req.h, levels=req.levels,
                   tol=req.tol, seed=req.seed, jobs=req.jobs)
        return ConvergenceResponse(summary=ConvergenceSummary(**out.summary), files=out.files, version=__version__)

    @app.post("/mesh", response_model=MeshResponse)
    def mesh(req: MeshRequest) -> MeshResponse:
        out = _run(runner.run_mesh, req.domain, target_h=req.h)
        return MeshResponse(summary=MeshSummary(**out.summary), files=out.files, version=__version__)

    return app


app = create_app()
