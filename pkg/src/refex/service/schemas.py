"""Request and response models for the HTTP service.

Models check shape at the edge; the io converters then re-check semantics
(token integrity, tag grammar) so HTTP and file inputs get identical
treatment. Unknown top-level keys are tolerated on input, matching the
file readers.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from .. import muc5
from ..decode import DecodeConfig
from ..grouping import GroupingConfig
from ..io import SCHEMA_VERSION
from ..pipeline import PipelineConfig


class _Lax(BaseModel):
    model_config = ConfigDict(extra="allow")


class LineIn(_Lax):
    id: int
    bbox: list[float] = Field(min_length=4, max_length=4)


class TokenIn(_Lax):
    id: int
    text: str
    bbox: list[float] = Field(min_length=4, max_length=4)
    line_id: int


class PageIn(_Lax):
    schema_version: str = SCHEMA_VERSION
    page_no: int
    width_px: int
    height_px: int
    lines: list[LineIn]
    tokens: list[TokenIn]


class TagIn(_Lax):
    token_id: int
    tag: str
    confidence: float = 1.0


class PredictionsIn(_Lax):
    schema_version: str = SCHEMA_VERSION
    page_no: int
    tags: list[TagIn]


class EntityIn(_Lax):
    type: str
    token_ids: list[int] = Field(min_length=1)
    text: str = ""  # informational; scoring keys on token ids


class AnnotationsIn(_Lax):
    schema_version: str = SCHEMA_VERSION
    page_no: int
    entities: list[EntityIn]


class GroupingParams(BaseModel):
    eps_y: float = 0.006
    eps_x: float = 0.02
    min_pts: int = 1
    column_gap: float = 0.05

    def to_config(self) -> GroupingConfig:
        return GroupingConfig(eps_y=self.eps_y, eps_x=self.eps_x,
                              min_pts=self.min_pts, column_gap=self.column_gap)


class DecodeParams(BaseModel):
    address_merge_gap: int = 5
    allow_i_start: bool = True

    def to_config(self) -> DecodeConfig:
        return DecodeConfig(address_merge_gap=self.address_merge_gap,
                            allow_i_start=self.allow_i_start)


class PipelineParams(BaseModel):
    grouping: GroupingParams = GroupingParams()
    decode: DecodeParams = DecodeParams()
    hybrid: bool = True
    muc5_mode: Literal["standard", "paper"] = muc5.DEFAULT_MODE
    tagger: str = "heuristic"

    def to_config(self) -> PipelineConfig:
        return PipelineConfig(grouping=self.grouping.to_config(),
                              decode=self.decode.to_config(),
                              hybrid=self.hybrid, muc5_mode=self.muc5_mode)


class GroupRequest(BaseModel):
    page: PageIn
    params: GroupingParams = GroupingParams()


class TagRequest(BaseModel):
    page: PageIn
    params: PipelineParams = PipelineParams()


class DecodeRequest(BaseModel):
    page: PageIn
    predictions: PredictionsIn
    params: PipelineParams = PipelineParams()


class ExtractRequest(BaseModel):
    page: PageIn
    params: PipelineParams = PipelineParams()


class ScoreRequest(BaseModel):
    page: PageIn
    entities: list[EntityIn]
    gold: AnnotationsIn
    mode: Literal["standard", "paper"] = muc5.DEFAULT_MODE


class PageCountsIn(BaseModel):
    # entity type value -> {"COR": n, "PAR": n, "INC": n, "MIS": n, "SPU": n}
    counts: dict[str, dict[str, int]]


class ReportRequest(BaseModel):
    pages: list[PageCountsIn]
    mode: Literal["standard", "paper"] = muc5.DEFAULT_MODE
    variant: str = "default"


class SynthRequest(BaseModel):
    seed: int
    template: Literal["single-column-form", "two-column", "label-above",
                      "label-left", "mixed"] = "label-left"
    page_no: int = 1
    bbox_jitter: float = 0.0
    token_dropout: float = 0.0
    label_noise: float = 0.0
    inject_phone: bool = False
    inject_i_start: bool = False


class GroupOut(_Lax):
    group_id: int
    line_ids: list[int]
    token_ids: list[int]
    text: str
    bbox: list[float]
    column_index: int
    rank: int


class GroupsResponse(_Lax):
    schema_version: str
    page_no: int
    groups: list[GroupOut]
    reading_order: list[int]


class PredictionsResponse(_Lax):
    schema_version: str
    page_no: int
    tags: list[TagIn]


class EntityOut(_Lax):
    type: str
    token_ids: list[int]
    text: str


class EntitiesResponse(_Lax):
    schema_version: str
    page_no: int
    entities: list[EntityOut]


class ScoreResponse(BaseModel):
    schema_version: str
    page_no: int
    counts: dict[str, dict[str, int]]


class SynthResponse(BaseModel):
    page: dict[str, Any]
    gold: dict[str, Any]
    injections: dict[str, Any]


class HealthResponse(BaseModel):
    status: str
    version: str
