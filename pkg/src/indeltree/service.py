"""HTTP face of the package.

A small FastAPI app wrapping the library: simulate a tree, derive
reconstruction thresholds, reconstruct a root from leaves, run the lemma
verifiers, or run a whole experiment sweep. The CLI drives this app in
process through an ASGI transport; `indeltree serve` exposes the same
app over a socket. Infeasible parameter combinations come back as 422
rather than 500.
"""

from __future__ import annotations

import dataclasses
import json
from importlib import resources

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .evolution import ModelParams, evolve_tree, length_stats
from .formats import bits_to_str, str_to_bits, tree_to_doc
from .harness import (
    ExperimentSpec,
    records_csv_text,
    run_experiment,
    timings_csv_text,
    verify_lemmas,
)
from .recon import InfeasibleParametersError, ReconConfig, derive_config, reconstruct_root

DEFAULT_EXPERIMENT = "acceptance.json"


class ModelFields(BaseModel):
    """Tree shape and channel probabilities, mirroring ModelParams."""

    arity: int = Field(ge=1)
    height: int = Field(ge=0)
    seq_len: int = Field(ge=1)
    p_sub: float = Field(default=0.0, ge=0.0, le=1.0)
    p_del: float = Field(default=0.0, ge=0.0, le=1.0)
    p_ins: float = Field(default=0.0, ge=0.0, le=1.0)

    def params(self) -> ModelParams:
        return ModelParams(
            arity=self.arity,
            height=self.height,
            seq_len=self.seq_len,
            p_sub=self.p_sub,
            p_del=self.p_del,
            p_ins=self.p_ins,
        )


class ConfigKnobs(BaseModel):
    """Optional overrides for the derived reconstruction config."""

    anchor_scale: float = Field(default=8.0, gt=0.0)
    beta: float | None = Field(default=None, ge=0.0)
    delta: float | None = None
    anchor_len: int | None = Field(default=None, ge=1)


def build_config(params: ModelParams, knobs: ConfigKnobs) -> ReconConfig:
    config = derive_config(
        params, anchor_scale=knobs.anchor_scale, beta=knobs.beta, delta=knobs.delta
    )
    if knobs.anchor_len is not None:
        config = dataclasses.replace(config, anchor_len=knobs.anchor_len)
    return config


class SimulateRequest(ModelFields):
    seed: int = 0
    zeta: float = Field(default=0.1, gt=0.0, lt=1.0)
    include_tree: bool = False


class SimulateResponse(BaseModel):
    leaves: list[str]
    min_len: int
    max_len: int
    length_ok: bool
    tree: dict | None = None


class DeriveConfigRequest(ModelFields, ConfigKnobs):
    pass


class ConfigResponse(BaseModel):
    arity: int
    height: int
    seq_len: int
    island_len: int
    anchor_len: int
    gamma: float
    delta: float
    beta: float
    anchor_scale: float


class ReconstructRequest(ModelFields, ConfigKnobs):
    leaves: list[str]
    seed: int = 0
    diagnostics: bool = False


class ReconstructResponse(BaseModel):
    bits: str
    raw_len: int
    padded: int
    truncated: int
    root_radioactive: bool
    radioactive_count: int
    diagnostics: dict | None = None


class VerifyRequest(BaseModel):
    lemma: str = "all"
    trials: int | None = Field(default=None, ge=1)
    seed: int | None = None
    spec: dict | None = None


class SweepRequest(BaseModel):
    spec: dict
    threads: int | None = Field(default=None, ge=1)


def default_experiment_spec() -> ExperimentSpec:
    """The experiment spec packaged with the library."""
    text = resources.files("indeltree.experiments").joinpath(DEFAULT_EXPERIMENT).read_text()
    return ExperimentSpec.from_dict(json.loads(text))


def parse_spec(doc: dict) -> ExperimentSpec:
    """Client-supplied spec dicts fail as 422, not 500."""
    try:
        return ExperimentSpec.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=f"bad experiment spec: {exc}")


def node_diagnostics(result) -> dict:
    """Per-node radioactivity, island sizes, and shift traces as JSON."""
    nodes = []
    for flat, nr in sorted(result.node_results.items()):
        nodes.append(
            {
                "node": flat,
                "radioactive": bool(nr.radioactive),
                "abort_round": nr.abort_round,
                "island_sizes": [len(g) for g in nr.g_sets],
                "shift_trace": [[int(s) for s in row] for row in nr.shift_history],
            }
        )
    return {
        "nodes": nodes,
        "radioactive_count": result.radioactive_count,
        "padded": result.padded,
        "truncated": result.truncated,
    }


def create_app() -> FastAPI:
    app = FastAPI(title="indeltree", version=__version__)

    @app.exception_handler(InfeasibleParametersError)
    async def infeasible(request: Request, exc: InfeasibleParametersError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/simulate", response_model=SimulateResponse, response_model_exclude_none=True)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        tree = evolve_tree(req.params(), req.seed)
        stats = length_stats(tree, req.zeta)
        return SimulateResponse(
            leaves=[bits_to_str(leaf.bits) for leaf in tree.leaves()],
            min_len=stats.min_len,
            max_len=stats.max_len,
            length_ok=stats.within_bounds,
            tree=tree_to_doc(tree) if req.include_tree else None,
        )

    @app.post("/derive_config", response_model=ConfigResponse)
    def derive(req: DeriveConfigRequest) -> ConfigResponse:
        config = build_config(req.params(), req)
        return ConfigResponse(**dataclasses.asdict(config))

    @app.post("/reconstruct", response_model=ReconstructResponse, response_model_exclude_none=True)
    def reconstruct(req: ReconstructRequest) -> ReconstructResponse:
        config = build_config(req.params(), req)
        try:
            leaves = [str_to_bits(s) for s in req.leaves]
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        result = reconstruct_root(leaves, config, req.seed, keep_nodes=req.diagnostics)
        return ReconstructResponse(
            bits=bits_to_str(result.bits),
            raw_len=result.raw_len,
            padded=result.padded,
            truncated=result.truncated,
            root_radioactive=result.root_radioactive,
            radioactive_count=result.radioactive_count,
            diagnostics=node_diagnostics(result) if req.diagnostics else None,
        )

    @app.post("/verify")
    def verify(req: VerifyRequest) -> dict:
        spec = parse_spec(req.spec) if req.spec is not None else default_experiment_spec()
        try:
            return verify_lemmas(spec, lemma=req.lemma, trials=req.trials, seed=req.seed)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/sweep")
    def sweep(req: SweepRequest) -> dict:
        spec = parse_spec(req.spec)
        if req.threads is not None:
            spec = dataclasses.replace(spec, threads=req.threads)
        result = run_experiment(spec)
        return {
            "summary": result.summary,
            "records_csv": records_csv_text(result.records),
            "timings_csv": timings_csv_text(result.timings),
        }

    return app


app = create_app()
