"""HTTP service exposing the planner, benchmark harness, and scene snapshots."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.responses import Response
from pydantic import BaseModel, Field

from . import __version__, harness
from .bridge import Strategy, interleaved_plan
from .librarian import (
    SCENARIOS,
    SCENE_VARIANTS,
    LibraryConfig,
    build_domain,
    build_library,
    build_problem,
    build_scene,
    experiment_domain,
    run_scenario,
)

STRATEGY_MODES = ("geometric-first", "htn-only")


class PlanRequest(BaseModel):
    scene: str = Field("reception-open", description="scene variant name")
    seed: int = 0
    held: tuple[str, ...] = ("b1", "b2")
    credit: int = 50
    tasks: tuple[str, ...] = ("(MANAGEORDER m)",)
    strategy: str = Field("geometric-first", pattern="|".join(STRATEGY_MODES))
    geo_budget: int = Field(8, ge=0)
    experiment: bool = False
    gtp_timeout: float = Field(60.0, gt=0)


class PlanStepModel(BaseModel):
    name: str
    args: tuple[str, ...]
    geo_adds: tuple[str, ...] = ()
    geo_dels: tuple[str, ...] = ()


class PlanStatsModel(BaseModel):
    htn_backtracks: int
    expansions: int
    methods_tried: int
    geo_alternatives: int
    alternative_attempts: int
    wall_time: float
    gtp: list[dict]


class PlanResponse(BaseModel):
    ok: bool
    failure: str | None
    plan: list[PlanStepModel] | None
    stats: PlanStatsModel


class BenchRequest(BaseModel):
    trials: int = Field(10, ge=1, le=500)
    seed0: int = 0
    strategy: str = Field("geometric-first", pattern="|".join(STRATEGY_MODES))
    geo_budget: int = Field(8, ge=0)
    credit: int = 3


class BenchResponse(BaseModel):
    runs: int
    success_rate: float
    mean_backtracks: float
    heavy_fraction: float
    mean_time: float
    rows: list[dict]
    csv: str
    text: str


class ScenarioResponse(BaseModel):
    name: str
    passed: bool
    diagnostics: list[str]
    runs: dict[str, PlanStatsModel]


def _stats_model(stats) -> PlanStatsModel:
    return PlanStatsModel(**stats.summary())


def _steps(plan) -> list[PlanStepModel] | None:
    if plan is None:
        return None
    return [
        PlanStepModel(
            name=s.name,
            args=s.args,
            geo_adds=tuple(str(l) for l in s.geo_adds),
            geo_dels=tuple(str(l) for l in s.geo_dels),
        )
        for s in plan
    ]


def create_app() -> FastAPI:
    app = FastAPI(title="geosym", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/scenarios")
    def scenarios() -> dict:
        return {"scenarios": sorted(SCENARIOS), "scenes": list(SCENE_VARIANTS)}

    @app.post("/plan", response_model=PlanResponse)
    def plan(req: PlanRequest) -> PlanResponse:
        try:
            scene = build_scene(req.scene, seed=req.seed)
        except Exception as exc:  # noqa: BLE001 - surfaced as a client error
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        domain = experiment_domain() if req.experiment else build_domain()
        library = build_library(LibraryConfig(experiment=req.experiment))
        problem = build_problem(held=req.held, credit=req.credit, tasks=req.tasks)
        result = interleaved_plan(
            domain, problem, scene, library,
            Strategy(req.strategy, req.geo_budget), gtp_timeout=req.gtp_timeout,
        )
        return PlanResponse(
            ok=result.ok,
            failure=result.failure,
            plan=_steps(result.plan),
            stats=_stats_model(result.stats),
        )

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest) -> BenchResponse:
        summary = harness.run_trials(
            req.trials, Strategy(req.strategy, req.geo_budget), req.seed0, req.credit
        )
        return BenchResponse(
            runs=summary.runs,
            success_rate=summary.success_rate,
            mean_backtracks=summary.mean_backtracks,
            heavy_fraction=summary.heavy_fraction,
            mean_time=summary.mean_time,
            rows=summary.kind_rows,
            csv=harness.to_csv(summary),
            text=harness.to_text(summary),
        )

    @app.post("/scenario/{name}", response_model=ScenarioResponse)
    def scenario(name: str) -> ScenarioResponse:
        if name not in SCENARIOS:
            raise HTTPException(status_code=404, detail=f"unknown scenario {name!r}")
        report = run_scenario(name)
        return ScenarioResponse(
            name=report.name,
            passed=report.passed,
            diagnostics=report.diagnostics,
            runs={k: _stats_model(r.stats) for k, r in report.results.items()},
        )

    @app.get("/snapshot/{variant}")
    def snapshot(variant: str, seed: int = 0) -> Response:
        if variant not in SCENE_VARIANTS:
            raise HTTPException(status_code=404, detail=f"unknown scene {variant!r}")
        svg = harness.scene_svg(build_scene(variant, seed=seed))
        return Response(content=svg, media_type="image/svg+xml")

    return app


app = create_app()
