"""Layout grouping: OCR lines -> segments in reading order.

Three steps: cluster lines into visual rows by y-center, chain x-adjacent
lines within each row, then split any group that a full-height whitespace
band divides into columns. The result fixes one reading-order rank per token.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import io as refex_io
from .errors import InputError, SchemaError
from .model import BBox, Line, Page, union_bbox


@dataclass(frozen=True)
class GroupingConfig:
    eps_y: float = 0.006
    eps_x: float = 0.02
    min_pts: int = 1
    column_gap: float = 0.05

    def __post_init__(self) -> None:
        for name in ("eps_y", "eps_x", "column_gap"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise InputError(f"{name} must be in (0, 1), got {value}")
        if self.min_pts < 1:
            raise InputError(f"min_pts must be >= 1, got {self.min_pts}")


@dataclass(frozen=True)
class LineGroup:
    id: int
    line_ids: tuple[int, ...]
    bbox: BBox
    column_index: int


@dataclass(frozen=True)
class GroupingResult:
    """Groups in reading order plus the token rank bijection."""

    groups: tuple[LineGroup, ...]
    reading_order: dict[int, int]

    def ranked_token_ids(self) -> list[int]:
        return sorted(self.reading_order, key=self.reading_order.__getitem__)


def dbscan(data: Sequence, eps: float, min_pts: int, *,
           metric: str = "euclidean") -> list[int]:
    """Density-based clustering over points or a precomputed distance matrix.

    With metric="euclidean", `data` holds scalars or same-dimension coordinate
    tuples. With metric="precomputed", `data` is a square matrix where inf
    marks pairs that are never neighbors; a point is always its own neighbor.
    Cluster labels are dense ints numbered by each cluster's lowest-index core
    point; noise is -1 (impossible when min_pts == 1). Non-core points within
    eps of several clusters join the one of their lowest-index core neighbor.
    """
    if not (eps > 0 and math.isfinite(eps)):
        raise InputError(f"eps must be finite and positive, got {eps}")
    if min_pts < 1:
        raise InputError(f"min_pts must be >= 1, got {min_pts}")
    n = len(data)
    if n == 0:
        return []

    if metric == "precomputed":
        neighbors = _neighbors_precomputed(data, eps)
    elif metric == "euclidean":
        neighbors = _neighbors_euclidean(data, eps)
    else:
        raise InputError(f"unknown metric {metric!r}")

    core = [len(neighbors[i]) >= min_pts for i in range(n)]
    labels = [-1] * n
    cluster = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != -1:
            continue
        labels[seed] = cluster
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            for q in neighbors[p]:
                if core[q] and labels[q] == -1:
                    labels[q] = cluster
                    queue.append(q)
        cluster += 1
    for i in range(n):
        if labels[i] == -1:
            near_cores = [j for j in neighbors[i] if core[j]]
            if near_cores:
                labels[i] = labels[min(near_cores)]
    return labels


def _neighbors_euclidean(data: Sequence, eps: float) -> list[list[int]]:
    coords: list[tuple[float, ...]] = []
    for i, p in enumerate(data):
        point = (float(p),) if isinstance(p, (int, float)) else tuple(float(v) for v in p)
        if any(not math.isfinite(v) for v in point):
            raise InputError(f"point {i} has non-finite coordinates: {point}")
        if coords and len(point) != len(coords[0]):
            raise InputError(f"point {i} has dimension {len(point)}, expected {len(coords[0])}")
        coords.append(point)
    eps_sq = eps * eps
    n = len(coords)
    neighbors: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            d = sum((a - b) ** 2 for a, b in zip(coords[i], coords[j]))
            if d <= eps_sq:
                neighbors[i].append(j)
                if j != i:
                    neighbors[j].append(i)
    for row in neighbors:
        row.sort()
    return neighbors


def _neighbors_precomputed(data: Sequence, eps: float) -> list[list[int]]:
    n = len(data)
    neighbors: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        row = data[i]
        if len(row) != n:
            raise InputError(f"distance matrix row {i} has length {len(row)}, expected {n}")
        for j in range(n):
            d = row[j]
            if d != d:  # NaN
                raise InputError(f"distance matrix entry ({i}, {j}) is NaN")
            if i == j or d <= eps:
                neighbors[i].append(j)
    return neighbors


def cluster_rows(lines: Sequence[Line], cfg: GroupingConfig) -> list[list[Line]]:
    """Cluster lines into visual rows on the y-center scalar. Every line is
    assigned: DBSCAN noise (possible when min_pts > 1) becomes a singleton."""
    if not lines:
        return []
    centers = [ln.bbox.y_center for ln in lines]
    labels = dbscan(centers, cfg.eps_y, cfg.min_pts)
    return _collect(lines, labels)


def cluster_within_row(row_lines: Sequence[Line], cfg: GroupingConfig) -> list[list[Line]]:
    """Chain x-adjacent lines of one row whose gaps are <= eps_x.

    The distance matrix is sparse: finite entries exist only between
    x-adjacent neighbors and hold the horizontal gap (0 when they overlap).
    """
    if not row_lines:
        return []
    ordered = sorted(row_lines, key=lambda ln: (ln.bbox.x0, ln.id))
    n = len(ordered)
    dist = [[math.inf] * n for _ in range(n)]
    for i in range(n):
        dist[i][i] = 0.0
        if i + 1 < n:
            gap = max(0.0, ordered[i + 1].bbox.x0 - ordered[i].bbox.x1)
            dist[i][i + 1] = gap
            dist[i + 1][i] = gap
    labels = dbscan(dist, cfg.eps_x, cfg.min_pts, metric="precomputed")
    return _collect(ordered, labels)


def _collect(items: Sequence[Line], labels: list[int]) -> list[list[Line]]:
    clusters: dict[int, list[Line]] = {}
    order: list[int] = []
    next_singleton = -1
    for item, label in zip(items, labels):
        if label == -1:
            label = next_singleton  # unique negative key per noise point
            next_singleton -= 1
        if label not in clusters:
            clusters[label] = []
            order.append(label)
        clusters[label].append(item)
    return [clusters[k] for k in order]


def split_columns(page: Page, lines: Sequence[Line], column_gap: float) -> list[list[Line]]:
    """Split a group wherever a vertical whitespace band of width >=
    column_gap crosses its full height (no token x-interval intersects it).
    Applied recursively; parts come back left to right.
    """
    if not lines:
        raise InputError("cannot split an empty group")
    intervals = sorted(
        (page.token(tid).bbox.x0, page.token(tid).bbox.x1)
        for ln in lines for tid in ln.token_ids)
    coverage: list[tuple[float, float]] = []
    for x0, x1 in intervals:
        if coverage and x0 <= coverage[-1][1]:
            coverage[-1] = (coverage[-1][0], max(coverage[-1][1], x1))
        else:
            coverage.append((x0, x1))
    cuts = [(left[1] + right[0]) / 2.0
            for left, right in zip(coverage, coverage[1:])
            if right[0] - left[1] >= column_gap]
    if not cuts:
        return [list(lines)]

    # A merged OCR line with tokens on both sides of a cut cannot be split
    # line-atomically; it goes to the side holding most of its tokens.
    parts: list[list[Line]] = [[] for _ in range(len(cuts) + 1)]
    for ln in lines:
        votes = [0] * (len(cuts) + 1)
        for tid in ln.token_ids:
            votes[bisect_left(cuts, page.token(tid).bbox.x_center)] += 1
        parts[max(range(len(votes)), key=lambda k: (votes[k], -k))].append(ln)

    filled = [p for p in parts if p]
    if len(filled) == 1:
        return [list(lines)]
    out: list[list[Line]] = []
    for part in filled:
        out.extend(split_columns(page, part, column_gap))
    return out


def segment_bbox(page: Page, line_ids: Iterable[int]) -> BBox:
    """Union box over a group's member lines. Empty input is an error."""
    boxes = [page.line(lid).bbox for lid in line_ids]
    if not boxes:
        raise InputError("segment has no lines")
    return union_bbox(boxes)


def group_page(page: Page, cfg: GroupingConfig | None = None) -> GroupingResult:
    """Run the three grouping steps and fix the page's reading order.

    Reading order: groups by (min-y, min-x, group id); lines within a group
    by (y-center, x0); tokens within a line left to right. Ranks form a
    bijection 0..n-1 over the page's tokens.
    """
    cfg = cfg or GroupingConfig()
    groups: list[LineGroup] = []
    gid = 0
    for row in cluster_rows(page.lines, cfg):
        for chain in cluster_within_row(row, cfg):
            parts = split_columns(page, chain, cfg.column_gap)
            parts.sort(key=lambda part: min(ln.bbox.x0 for ln in part))
            for col_idx, part in enumerate(parts):
                ordered = sorted(part, key=lambda ln: (ln.bbox.y_center, ln.bbox.x0, ln.id))
                bbox = union_bbox([ln.bbox for ln in ordered])
                groups.append(LineGroup(gid, tuple(ln.id for ln in ordered), bbox, col_idx))
                gid += 1

    groups.sort(key=lambda g: (g.bbox.y0, g.bbox.x0, g.id))
    reading_order: dict[int, int] = {}
    rank = 0
    for group in groups:
        for lid in group.line_ids:
            for tid in page.line(lid).token_ids:
                reading_order[tid] = rank
                rank += 1
    return GroupingResult(tuple(groups), reading_order)


def group_token_ids(page: Page, group: LineGroup) -> list[int]:
    """Token ids of a group in reading order."""
    return [tid for lid in group.line_ids for tid in page.line(lid).token_ids]


# --- groups debug dump (pipeline intermediate, consumed by the adapter) -----

def groups_to_dict(page: Page, result: GroupingResult) -> dict:
    records = []
    for rank, group in enumerate(result.groups):
        tids = group_token_ids(page, group)
        records.append({
            "group_id": group.id,
            "line_ids": list(group.line_ids),
            "token_ids": tids,
            "text": " ".join(page.token(t).text for t in tids),
            "bbox": [group.bbox.x0, group.bbox.y0, group.bbox.x1, group.bbox.y1],
            "column_index": group.column_index,
            "rank": rank,
        })
    return {
        "schema_version": refex_io.SCHEMA_VERSION,
        "page_no": page.page_no,
        "groups": records,
        "reading_order": result.ranked_token_ids(),
    }


def groups_from_dict(data: dict, ctx: str = "groups") -> GroupingResult:
    if data.get("schema_version") != refex_io.SCHEMA_VERSION:
        raise SchemaError(f"{ctx}: schema_version must be {refex_io.SCHEMA_VERSION!r}")
    raw_order = data.get("reading_order")
    if not isinstance(raw_order, list):
        raise SchemaError(f"{ctx}: reading_order must be a list of token ids")
    reading_order = {tid: rank for rank, tid in enumerate(raw_order)}
    if len(reading_order) != len(raw_order):
        raise SchemaError(f"{ctx}: reading_order repeats token ids")
    groups = []
    for i, rec in enumerate(data.get("groups", [])):
        try:
            groups.append(LineGroup(
                id=rec["group_id"],
                line_ids=tuple(rec["line_ids"]),
                bbox=BBox(*rec["bbox"]),
                column_index=rec["column_index"],
            ))
        except (KeyError, TypeError, InputError) as exc:
            raise SchemaError(f"{ctx}: group record {i} malformed: {exc}") from exc
    return GroupingResult(tuple(groups), reading_order)


def write_groups(page: Page, result: GroupingResult, path: str | Path) -> None:
    refex_io.dump_json(groups_to_dict(page, result), path)


def read_groups(path: str | Path) -> GroupingResult:
    return groups_from_dict(refex_io.load_json(path), ctx=str(path))
