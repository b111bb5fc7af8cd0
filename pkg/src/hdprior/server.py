"""HTTP JSON API for the elicitation UI.

Stateless except for an in-memory registry of immutable model snapshots.
Posting a model file assembles and registers it; editing a split's prior
registers a new snapshot under a new id (old ids stay queryable), which
gives the UI an undo history for free.  Densities, samples and marginal
summaries are computed from the registered snapshot, so they match the CLI
byte for byte for the same model file.
"""

from __future__ import annotations

import copy
import threading
import uuid
from datetime import datetime, timezone

from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import formats, hd_model
from .errors import NumericalError, ValidationError
from .model_file import SCHEMA, ModelFile, parse_model_dict, serialize
from .numerics import RandomSource
from .split_priors import tabulate, tabulate_dirichlet_marginal

MAX_SAMPLES = 1_000_000
API = "/api"


class CreateModelResponse(BaseModel):
    id: str
    calibration: dict


class ModelSummary(BaseModel):
    id: str
    schema_version: str = Field(default=SCHEMA)
    created_at: str
    model_file: dict
    calibration: dict


class DensityResponse(BaseModel):
    id: str
    split: int
    prior: str
    median: float | None = None
    omega: list[float]
    log_density: list[float]
    cdf: list[float]


class PriorPatch(BaseModel):
    """Replacement prior block for one split; optionally a new base model."""

    type: str
    median: float | None = None
    concentration: float | None = None
    base: list[float] | None = None


class ErrorBody(BaseModel):
    error: str
    message: str


class _Registry:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}

    def put(self, mf: ModelFile, model: hd_model.HDPriorModel) -> str:
        token = uuid.uuid4().hex[:12]
        entry = {
            "id": token,
            "model_file": mf,
            "model": model,
            "created_at": datetime.now(timezone.utc).isoformat(),
        }
        with self._lock:
            self._entries[token] = entry
        return token

    def get(self, token: str) -> dict | None:
        with self._lock:
            return self._entries.get(token)


def _patch_model_dict(entry: dict, split_index: int, patch: PriorPatch) -> dict:
    """New model-file dict with one split's prior block replaced."""
    model: hd_model.HDPriorModel = entry["model"]
    if not 1 <= split_index <= len(model.splits):
        raise ValidationError(f"split index must be in 1..{len(model.splits)}")
    origin = model.splits[split_index - 1].origin
    data = copy.deepcopy(serialize(entry["model_file"]))

    block: dict = {"type": patch.type}
    if patch.median is not None:
        block["median"] = patch.median
    if patch.concentration is not None:
        block["concentration"] = patch.concentration

    if origin[0] == "residual":
        if patch.type != "pc" or patch.median is None:
            raise ValidationError("the residual split takes {'type': 'pc', 'median': m}")
        if patch.base is not None or patch.concentration is not None:
            raise ValidationError("the residual split has a fixed base (0, 1)")
        data["residual"]["median"] = patch.median
        return data
    if origin[0] == "expanded":
        raise ValidationError(
            "this split was generated by multi-split expansion; edit the "
            f"multi-way split (file split {origin[1]}) instead"
        )

    # walk the nested tree to the origin[1]-th split in preorder
    counter = {"k": 0}

    def walk(node: dict) -> dict | None:
        if "leaf" in node:
            return None
        counter["k"] += 1
        if counter["k"] == origin[1]:
            return node
        for child in node["children"]:
            found = walk(child)
            if found is not None:
                return found
        return None

    node = walk(data["tree"])
    if node is None:
        raise NumericalError("internal split bookkeeping failure")
    node["prior"] = block
    if patch.base is not None:
        node["base"] = list(patch.base)
    return data


def create_app() -> FastAPI:
    app = FastAPI(title="hdprior elicitation service", version="1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    registry = _Registry()

    @app.exception_handler(ValidationError)
    async def _validation_handler(_, exc: ValidationError):
        return JSONResponse(status_code=422,
                            content={"error": type(exc).__name__, "message": str(exc)})

    @app.exception_handler(NumericalError)
    async def _numerical_handler(_, exc: NumericalError):
        return JSONResponse(status_code=500,
                            content={"error": type(exc).__name__, "message": str(exc)})

    def _entry_or_404(token: str) -> dict | JSONResponse:
        entry = registry.get(token)
        if entry is None:
            return JSONResponse(status_code=404,
                                content={"error": "NotFound", "message": f"no model {token!r}"})
        return entry

    @app.post(f"{API}/models", status_code=201, response_model=CreateModelResponse,
              responses={422: {"model": ErrorBody}})
    async def create_model(body: dict):
        mf = parse_model_dict(body)
        model = hd_model.assemble(mf)
        token = registry.put(mf, model)
        return CreateModelResponse(id=token, calibration=model.report)

    @app.get(API + "/models/{token}", response_model=ModelSummary,
             responses={404: {"model": ErrorBody}})
    async def get_model(token: str):
        entry = _entry_or_404(token)
        if isinstance(entry, JSONResponse):
            return entry
        return ModelSummary(
            id=entry["id"],
            created_at=entry["created_at"],
            model_file=serialize(entry["model_file"]),
            calibration=entry["model"].report,
        )

    @app.get(API + "/models/{token}/splits/{split}/density",
             responses={404: {"model": ErrorBody}, 422: {"model": ErrorBody},
                        200: {"model": DensityResponse}})
    async def get_density(token: str, split: int, points: int = hd_model.TABLE_POINTS,
                          format: str = "json"):
        entry = _entry_or_404(token)
        if isinstance(entry, JSONResponse):
            return entry
        model: hd_model.HDPriorModel = entry["model"]
        if not 1 <= split <= len(model.splits):
            raise ValidationError(f"split index must be in 1..{len(model.splits)}")
        cs = model.splits[split - 1]
        if points == hd_model.TABLE_POINTS:
            table = cs.table
        elif cs.kind == "pc":
            table = tabulate(cs.pc, points)
        else:
            table = tabulate_dirichlet_marginal(cs.dirichlet, points)
        if format == "csv":
            return Response(content=table.to_csv(), media_type="text/csv")
        if format != "json":
            raise ValidationError("format must be 'json' or 'csv'")
        return DensityResponse(
            id=token,
            split=split,
            prior=cs.kind,
            median=cs.median,
            omega=[float(v) for v in table.omega],
            log_density=[float(v) for v in table.log_density],
            cdf=[float(v) for v in table.cdf],
        )

    @app.post(API + "/models/{token}/splits/{split}/prior", status_code=201,
              response_model=CreateModelResponse,
              responses={404: {"model": ErrorBody}, 422: {"model": ErrorBody}})
    async def patch_prior(token: str, split: int, patch: PriorPatch):
        entry = _entry_or_404(token)
        if isinstance(entry, JSONResponse):
            return entry
        data = _patch_model_dict(entry, split, patch)
        mf = parse_model_dict(data)
        model = hd_model.assemble(mf)
        new_token = registry.put(mf, model)
        return CreateModelResponse(id=new_token, calibration=model.report)

    @app.get(API + "/models/{token}/samples",
             responses={404: {"model": ErrorBody}, 422: {"model": ErrorBody}})
    async def get_samples(token: str, n: int = 1000, seed: int = 0):
        entry = _entry_or_404(token)
        if isinstance(entry, JSONResponse):
            return entry
        if not 1 <= n <= MAX_SAMPLES:
            raise ValidationError(f"n must be in 1..{MAX_SAMPLES}")
        model: hd_model.HDPriorModel = entry["model"]
        draws = hd_model.sample_chunked(model, n, seed)
        csv = formats.samples_csv(model, draws)
        return Response(content=csv, media_type="text/csv")

    @app.get(API + "/models/{token}/marginals",
             responses={404: {"model": ErrorBody}, 422: {"model": ErrorBody}})
    async def get_marginals(token: str, n: int = 10000, seed: int = 0):
        entry = _entry_or_404(token)
        if isinstance(entry, JSONResponse):
            return entry
        if not 1 <= n <= MAX_SAMPLES:
            raise ValidationError(f"n must be in 1..{MAX_SAMPLES}")
        model: hd_model.HDPriorModel = entry["model"]
        return hd_model.marginal_report(model, RandomSource(seed), n)

    return app


app = create_app()
