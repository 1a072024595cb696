"""FastAPI service exposing scenario runs, sweeps, and validation.

The CLI is a thin client of this app (in-process by default), so every
behavior lives here exactly once. Error payloads always carry a stable
machine-readable code:

* invalid_request   - request envelope malformed
* validation_failed - inputs parsed but are semantically unusable
* placement_failed  - no feasible module placement exists
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..application import AppValidationError, application_from_dict
from ..placement import (
    PlacementConstraint,
    PlacementError,
    run_policy,
    validate_placement,
)
from ..scenarios import (
    ScenarioError,
    ValidationFailure,
    get_scenario,
    list_scenarios,
    prepare,
    run_scenario,
    run_sweep_cell,
)
from ..topology import SchemaError, topology_from_dict
from .models import (
    CustomRunSpec,
    RunRequest,
    RunResponse,
    ScenariosResponse,
    SweepFailure,
    SweepRequest,
    SweepResponse,
    ValidateRequest,
    ValidateResponse,
)

log = logging.getLogger("fogsim.service")


def _error(status: int, code: str, message: str, details: Optional[List[str]] = None):
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message, "details": details or []}},
    )


def _run_custom(spec: CustomRunSpec) -> dict:
    topology = topology_from_dict(spec.topology)
    app = application_from_dict(spec.app)
    constraints = [
        PlacementConstraint(c.module, c.target, c.exclusive) for c in spec.constraints
    ]
    sim = prepare(
        topology, app, constraints, spec.placement,
        seed=spec.seed, distribution=spec.distribution,
    )
    report = sim.run(spec.duration_ms, scenario=app.name,
                     parameters={"custom": True})
    return report.to_dict()


def create_app() -> FastAPI:
    api = FastAPI(title="fogsim", version="0.1.0")

    @api.exception_handler(RequestValidationError)
    async def _on_bad_request(request: Request, exc: RequestValidationError):
        details = [f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()]
        return _error(400, "invalid_request", "request body is invalid", details)

    @api.exception_handler(ScenarioError)
    async def _on_scenario(request: Request, exc: ScenarioError):
        return _error(422, "validation_failed", str(exc))

    @api.exception_handler(SchemaError)
    async def _on_schema(request: Request, exc: SchemaError):
        return _error(422, "validation_failed", str(exc))

    @api.exception_handler(AppValidationError)
    async def _on_app(request: Request, exc: AppValidationError):
        return _error(422, "validation_failed", str(exc))

    @api.exception_handler(ValidationFailure)
    async def _on_validation(request: Request, exc: ValidationFailure):
        return _error(422, "validation_failed", "inputs failed validation",
                      exc.violations)

    @api.exception_handler(PlacementError)
    async def _on_placement(request: Request, exc: PlacementError):
        return _error(422, "placement_failed", str(exc))

    @api.get("/scenarios", response_model=ScenariosResponse)
    def scenarios() -> dict:
        return {"scenarios": list_scenarios()}

    @api.post("/runs", response_model=RunResponse)
    def runs(req: RunRequest) -> dict:
        t0 = time.perf_counter()
        if req.scenario is not None:
            s = req.scenario
            log.info("run scenario=%s config=%d placement=%s", s.scenario, s.config,
                     s.placement)
            report = run_scenario(
                s.scenario,
                config=s.config,
                variant=s.variant,
                placement_policy=s.placement,
                duration_ms=s.duration_ms,
                seed=s.seed,
                distribution=s.distribution,
                ggs_period_ms=s.ggs_period_ms,
            ).to_dict()
        else:
            log.info("run custom placement=%s", req.custom.placement)
            report = _run_custom(req.custom)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        return {"report": report, "wall_ms": wall_ms}

    @api.post("/sweeps", response_model=SweepResponse)
    def sweeps(req: SweepRequest) -> dict:
        spec = get_scenario(req.scenario)
        variants = req.variants if req.variants else spec.variants
        cells = [
            (req.scenario, config, variant, placement, req.duration_ms,
             req.seed, req.distribution, req.ggs_period_ms)
            for config in req.configs
            for variant in variants
            for placement in req.placements
        ]
        log.info("sweep scenario=%s cells=%d jobs=%d", req.scenario, len(cells),
                 req.jobs)
        rows: List[Optional[dict]] = [None] * len(cells)
        failures: List[SweepFailure] = []

        def record_failure(cell, exc):
            failures.append(SweepFailure(
                scenario=cell[0], config=cell[1], variant=cell[2] or "-",
                placement=cell[3], error=f"{type(exc).__name__}: {exc}",
            ))

        if req.jobs == 1 or len(cells) == 1:
            for i, cell in enumerate(cells):
                try:
                    rows[i] = run_sweep_cell(*cell)
                except (ScenarioError, ValidationFailure, PlacementError,
                        SchemaError, AppValidationError) as exc:
                    record_failure(cell, exc)
        else:
            with ProcessPoolExecutor(max_workers=req.jobs) as pool:
                futures = [pool.submit(run_sweep_cell, *cell) for cell in cells]
                for i, (cell, fut) in enumerate(zip(cells, futures)):
                    try:
                        rows[i] = fut.result()
                    except (ScenarioError, ValidationFailure, PlacementError,
                            SchemaError, AppValidationError) as exc:
                        record_failure(cell, exc)
        return {
            "rows": [r for r in rows if r is not None],
            "failures": failures,
        }

    @api.post("/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest) -> dict:
        violations: List[str] = []
        warnings: List[str] = []
        try:
            topology = topology_from_dict(req.topology)
            app = application_from_dict(req.app)
        except SchemaError as exc:
            return {"valid": False, "violations": [str(exc)], "warnings": []}
        violations.extend(topology.validate())
        violations.extend(app.validate(topology))
        if not violations and req.placement:
            constraints = [
                PlacementConstraint(c.module, c.target, c.exclusive)
                for c in req.constraints
            ]
            try:
                rates = app.propagate_rates(topology)
                pmap = run_policy(req.placement, topology, app, rates, constraints)
            except (PlacementError, AppValidationError) as exc:
                violations.append(str(exc))
            else:
                pv, pw = validate_placement(topology, app, pmap)
                violations.extend(pv)
                warnings.extend(pw)
        return {
            "valid": not violations,
            "violations": violations,
            "warnings": warnings,
        }

    return api


app = create_app()
