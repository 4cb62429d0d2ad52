"""FastAPI wrapper around the extraction pipeline.

Each endpoint is a thin adapter: pydantic checks the wire shape, the io
converters enforce artifact semantics, and the same pipeline functions the
batch CLI uses do the work. Responses are the artifact dicts themselves, so
a staged HTTP run writes byte-identical files to an in-process run.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, io as refex_io, muc5, pipeline, synth
from ..errors import (ConflictError, InputError, IntegrityError, RefexError,
                      SchemaError)
from ..grouping import group_page, groups_to_dict
from ..model import EntityType
from ..muc5 import MucCounts
from ..tagging import build_tagger
from . import schemas


def _counts_to_wire(counts: dict[EntityType, MucCounts]) -> dict[str, dict[str, int]]:
    return {etype.value: {"COR": c.COR, "PAR": c.PAR, "INC": c.INC,
                          "MIS": c.MIS, "SPU": c.SPU}
            for etype, c in counts.items()}


def _counts_from_wire(raw: dict[str, dict[str, int]],
                      ctx: str) -> dict[EntityType, MucCounts]:
    out: dict[EntityType, MucCounts] = {t: MucCounts() for t in EntityType}
    for name, fields in raw.items():
        try:
            etype = EntityType(name)
        except ValueError:
            raise SchemaError(f"{ctx}: unknown entity type {name!r}") from None
        unknown = set(fields) - {"COR", "PAR", "INC", "MIS", "SPU"}
        if unknown:
            raise SchemaError(f"{ctx}: unknown count fields {sorted(unknown)}")
        out[etype] = MucCounts(**{k: int(v) for k, v in fields.items()})
    return out


def create_app() -> FastAPI:
    app = FastAPI(title="refex", version=__version__)

    @app.exception_handler(RefexError)
    async def _refex_error(_: Request, exc: RefexError) -> JSONResponse:
        status = 409 if isinstance(exc, (IntegrityError, ConflictError)) else 422
        return JSONResponse(status_code=status,
                            content={"detail": f"{type(exc).__name__}: {exc}"})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/v1/group", response_model=schemas.GroupsResponse)
    def group(req: schemas.GroupRequest) -> dict:
        page = refex_io.page_from_dict(req.page.model_dump(), ctx="page")
        result = group_page(page, req.params.to_config())
        return groups_to_dict(page, result)

    @app.post("/v1/tag", response_model=schemas.PredictionsResponse)
    def tag(req: schemas.TagRequest) -> dict:
        page = refex_io.page_from_dict(req.page.model_dump(), ctx="page")
        grouping = group_page(page, req.params.grouping.to_config())
        tagger = build_tagger(req.params.tagger)
        return refex_io.predictions_to_dict(tagger.tag(page, grouping))

    @app.post("/v1/decode", response_model=schemas.EntitiesResponse)
    def decode(req: schemas.DecodeRequest) -> dict:
        page = refex_io.page_from_dict(req.page.model_dump(), ctx="page")
        preds = refex_io.predictions_from_dict(req.predictions.model_dump(),
                                               ctx="predictions")
        refex_io.check_prediction_coverage(preds, page)
        result = pipeline.extract_from_predictions(page, preds,
                                                   req.params.to_config())
        return refex_io.entities_to_dict(page, result.selected)

    @app.post("/v1/extract", response_model=schemas.EntitiesResponse)
    def extract(req: schemas.ExtractRequest) -> dict:
        page = refex_io.page_from_dict(req.page.model_dump(), ctx="page")
        tagger = build_tagger(req.params.tagger)
        result = pipeline.extract_page(page, tagger, req.params.to_config())
        return refex_io.entities_to_dict(page, result.selected)

    @app.post("/v1/score", response_model=schemas.ScoreResponse)
    def score(req: schemas.ScoreRequest) -> dict:
        page = refex_io.page_from_dict(req.page.model_dump(), ctx="page")
        ent_file = refex_io.entities_from_dict(
            {"schema_version": refex_io.SCHEMA_VERSION, "page_no": page.page_no,
             "entities": [e.model_dump() for e in req.entities]},
            ctx="entities")
        gold = refex_io.annotations_from_dict(req.gold.model_dump(),
                                              ctx="gold", page=page)
        counts = pipeline.score_spans(
            page, [rec.span for rec in ent_file.entities], gold)
        return {"schema_version": refex_io.SCHEMA_VERSION,
                "page_no": page.page_no, "counts": _counts_to_wire(counts)}

    @app.post("/v1/report")
    def report(req: schemas.ReportRequest) -> dict:
        page_counts = [_counts_from_wire(p.counts, f"pages[{i}]")
                       for i, p in enumerate(req.pages)]
        return muc5.build_report(page_counts, mode=req.mode,
                                 variant=req.variant, pages=len(page_counts))

    @app.post("/v1/synth", response_model=schemas.SynthResponse)
    def synth_page(req: schemas.SynthRequest) -> dict:
        template = synth.PageTemplate(
            kind=synth.LayoutKind(req.template),
            noise=synth.NoiseProfile(
                bbox_jitter=req.bbox_jitter, token_dropout=req.token_dropout,
                label_noise=req.label_noise, inject_phone=req.inject_phone,
                inject_i_start=req.inject_i_start))
        fixture = synth.generate_page(req.seed, template, page_no=req.page_no)
        return {"page": refex_io.page_to_dict(fixture.page),
                "gold": refex_io.annotations_to_dict(fixture.annotations),
                "injections": fixture.injections}

    return app
