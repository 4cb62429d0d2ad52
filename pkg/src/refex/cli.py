"""Batch CLI for the extraction pipeline.

Subcommands mirror the pipeline stages (synth, group, tag, decode, run, eval)
plus serve for the HTTP service. Staged invocations and single-shot `run`
write byte-identical artifacts because every path funnels through the same
pipeline functions and the same JSON writer. Commands execute in-process by
default; pass --server to send the work to a running service instead.

Exit codes: 0 success (per-page failures are reported but tolerated unless
--strict), 1 corpus-level problems (unreadable inputs, missing files, bad
config), 2 usage errors.
"""

from __future__ import annotations

import functools
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import io as refex_io
from . import muc5, pipeline, synth
from .decode import DecodeConfig
from .errors import RefexError
from .grouping import GroupingConfig, group_page, groups_to_dict
from .rules import RuleConfig, load_rule_config
from .tagging import FileTagger, build_tagger

log = logging.getLogger("refex.cli")

CONFIG_ENV = "REFEX_CONFIG"
_CONFIG_KEYS = {"eps_y", "eps_x", "min_pts", "column_gap", "merge_gap",
                "allow_i_start", "hybrid", "muc5_mode", "tagger", "rules"}

PAGE_SUFFIX = ".ocr.json"
GOLD_SUFFIX = ".gold.json"
TAGS_SUFFIX = ".tags.json"
ENTITIES_SUFFIX = ".entities.json"


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    raise SystemExit(1)


def _command(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except RefexError as exc:
            _fail(str(exc))
        except OSError as exc:
            _fail(str(exc))
    return wrapper


def _load_config(config_path: str | None) -> dict:
    path = config_path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    data = refex_io.load_json(path)
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        log.warning("config %s: ignoring unknown keys %s", path, unknown)
    return data


def _resolve(config_path: str | None, *, eps_y: float | None = None,
             eps_x: float | None = None, min_pts: int | None = None,
             col_gap: float | None = None, merge_gap: int | None = None,
             no_i_start: bool = False, no_hybrid: bool = False,
             muc5_mode: str | None = None, tagger: str | None = None,
             ) -> tuple[pipeline.PipelineConfig, str]:
    """Merge precedence: explicit flag > config file > built-in default."""
    cfg = _load_config(config_path)

    def pick(flag, key, default):
        return flag if flag is not None else cfg.get(key, default)

    grouping = GroupingConfig(
        eps_y=pick(eps_y, "eps_y", 0.006), eps_x=pick(eps_x, "eps_x", 0.02),
        min_pts=pick(min_pts, "min_pts", 1),
        column_gap=pick(col_gap, "column_gap", 0.05))
    decode = DecodeConfig(
        address_merge_gap=pick(merge_gap, "merge_gap", 5),
        allow_i_start=False if no_i_start else bool(cfg.get("allow_i_start", True)))
    rules = load_rule_config(cfg["rules"]) if "rules" in cfg else RuleConfig()
    pc = pipeline.PipelineConfig(
        grouping=grouping, decode=decode, rules=rules,
        hybrid=False if no_hybrid else bool(cfg.get("hybrid", True)),
        muc5_mode=muc5_mode if muc5_mode else cfg.get("muc5_mode", muc5.DEFAULT_MODE))
    tagger_spec = tagger if tagger else cfg.get("tagger", "heuristic")
    return pc, tagger_spec


def _wire_params(pc: pipeline.PipelineConfig, tagger: str) -> dict:
    # Rule customizations do not travel over the wire; a --server run uses
    # the server's defaults.
    return {
        "grouping": {"eps_y": pc.grouping.eps_y, "eps_x": pc.grouping.eps_x,
                     "min_pts": pc.grouping.min_pts,
                     "column_gap": pc.grouping.column_gap},
        "decode": {"address_merge_gap": pc.decode.address_merge_gap,
                   "allow_i_start": pc.decode.allow_i_start},
        "hybrid": pc.hybrid,
        "muc5_mode": pc.muc5_mode,
        "tagger": tagger,
    }


def _post(server: str, route: str, payload: dict) -> dict:
    import httpx

    url = server.rstrip("/") + route
    try:
        resp = httpx.post(url, json=payload, timeout=120.0)
    except httpx.HTTPError as exc:
        _fail(f"request to {url} failed: {exc}")
    if resp.status_code != 200:
        _fail(f"{url} returned {resp.status_code}: {resp.text}")
    return resp.json()


def _read_page_checked(path: str):
    if not Path(path).is_file():
        _fail(f"page file not found: {path}")
    return refex_io.read_page(path)


def _config_option(f):
    return click.option(
        "--config", "config_path", default=None, metavar="PATH",
        help=f"JSON config file; ${CONFIG_ENV} is the fallback. Flags win.")(f)


def _grouping_options(f):
    for deco in (
        click.option("--eps-y", type=float, default=None,
                     help="row clustering radius on y-centers [0.006]"),
        click.option("--eps-x", type=float, default=None,
                     help="max horizontal gap chaining lines in a row [0.02]"),
        click.option("--min-pts", type=int, default=None,
                     help="density threshold for clustering [1]"),
        click.option("--col-gap", type=float, default=None,
                     help="whitespace band width that splits columns [0.05]"),
    ):
        f = deco(f)
    return f


def _decode_options(f):
    for deco in (
        click.option("--merge-gap", type=int, default=None,
                     help="max tokens between merged address fragments [5]"),
        click.option("--no-i-start", is_flag=True,
                     help="treat a bare I tag as O instead of opening a span"),
    ):
        f = deco(f)
    return f


def _server_option(f):
    return click.option("--server", default=None, metavar="URL",
                        help="send the work to a running service")(f)


@click.group()
@click.option("--verbose", is_flag=True, help="log at INFO")
@click.version_option()
def main(verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(name)s %(levelname)s %(message)s")


@main.command("synth")
@click.option("--seed", type=int, required=True)
@click.option("--pages", "n_pages", type=int, default=10, show_default=True)
@click.option("--out", "out_dir", required=True, metavar="DIR")
@click.option("--mix", default=None,
              help="comma-separated layout kinds (default: all five)")
@click.option("--jitter", type=float, default=0.0, show_default=True)
@click.option("--dropout", type=float, default=0.0, show_default=True)
@click.option("--label-noise", type=float, default=0.0, show_default=True)
@click.option("--inject-phone", is_flag=True)
@click.option("--inject-i-start", is_flag=True)
@_command
def synth_cmd(seed: int, n_pages: int, out_dir: str, mix: str | None,
              jitter: float, dropout: float, label_noise: float,
              inject_phone: bool, inject_i_start: bool) -> None:
    """Generate a synthetic corpus with gold annotations and a manifest."""
    try:
        kinds = ([synth.LayoutKind(k.strip()) for k in mix.split(",")]
                 if mix else list(synth.LayoutKind))
    except ValueError:
        _fail(f"unknown layout kind in --mix; choose from "
              f"{', '.join(k.value for k in synth.LayoutKind)}")
    noise = synth.NoiseProfile(
        bbox_jitter=jitter, token_dropout=dropout, label_noise=label_noise,
        inject_phone=inject_phone, inject_i_start=inject_i_start)
    templates = tuple(synth.PageTemplate(kind, noise=noise) for kind in kinds)
    manifest = synth.generate_corpus(seed, n_pages, templates, out_dir)
    click.echo(f"wrote {manifest.n_pages} pages to {out_dir}")


@main.command("group")
@click.option("--page", "page_path", required=True, metavar="FILE")
@click.option("--out", "out_path", required=True, metavar="FILE")
@_grouping_options
@_config_option
@_server_option
@_command
def group_cmd(page_path: str, out_path: str, eps_y, eps_x, min_pts, col_gap,
              config_path, server) -> None:
    """Cluster one page's lines into layout groups."""
    pc, _ = _resolve(config_path, eps_y=eps_y, eps_x=eps_x, min_pts=min_pts,
                     col_gap=col_gap)
    if server:
        page_dict = refex_io.load_json(page_path)
        data = _post(server, "/v1/group",
                     {"page": page_dict,
                      "params": _wire_params(pc, "heuristic")["grouping"]})
        refex_io.dump_json(data, out_path)
        return
    page = _read_page_checked(page_path)
    result = group_page(page, pc.grouping)
    refex_io.dump_json(groups_to_dict(page, result), out_path)


@main.command("tag")
@click.option("--page", "page_path", required=True, metavar="FILE")
@click.option("--out", "out_path", required=True, metavar="FILE")
@click.option("--tagger", default=None, metavar="SPEC",
              help="'heuristic' or 'file:<path>' [heuristic]")
@_grouping_options
@_config_option
@_server_option
@_command
def tag_cmd(page_path: str, out_path: str, tagger, eps_y, eps_x, min_pts,
            col_gap, config_path, server) -> None:
    """Emit per-token tag predictions for one page."""
    pc, tagger_spec = _resolve(config_path, eps_y=eps_y, eps_x=eps_x,
                               min_pts=min_pts, col_gap=col_gap, tagger=tagger)
    if server:
        page_dict = refex_io.load_json(page_path)
        data = _post(server, "/v1/tag",
                     {"page": page_dict, "params": _wire_params(pc, tagger_spec)})
        refex_io.dump_json(data, out_path)
        return
    page = _read_page_checked(page_path)
    grouping = group_page(page, pc.grouping)
    predictions = build_tagger(tagger_spec).tag(page, grouping)
    refex_io.write_predictions(predictions, out_path)


@main.command("decode")
@click.option("--page", "page_path", required=True, metavar="FILE")
@click.option("--predictions", "pred_path", required=True, metavar="FILE")
@click.option("--out", "out_path", required=True, metavar="FILE")
@click.option("--no-hybrid", is_flag=True, help="skip the domain cleanup rules")
@_grouping_options
@_decode_options
@_config_option
@_server_option
@_command
def decode_cmd(page_path: str, pred_path: str, out_path: str, no_hybrid,
               eps_y, eps_x, min_pts, col_gap, merge_gap, no_i_start,
               config_path, server) -> None:
    """Decode token tags into selected entities for one page."""
    pc, _ = _resolve(config_path, eps_y=eps_y, eps_x=eps_x, min_pts=min_pts,
                     col_gap=col_gap, merge_gap=merge_gap,
                     no_i_start=no_i_start, no_hybrid=no_hybrid)
    if not Path(pred_path).is_file():
        _fail(f"predictions file not found: {pred_path}")
    if server:
        data = _post(server, "/v1/decode",
                     {"page": refex_io.load_json(page_path),
                      "predictions": refex_io.load_json(pred_path),
                      "params": _wire_params(pc, "heuristic")})
        refex_io.dump_json(data, out_path)
        return
    page = _read_page_checked(page_path)
    predictions = refex_io.read_predictions(pred_path)
    refex_io.check_prediction_coverage(predictions, page)
    result = pipeline.extract_from_predictions(page, predictions, pc)
    refex_io.write_entities(page, result.selected, out_path)


def _corpus_pages(pages_dir: str) -> list[tuple[str, Path]]:
    root = Path(pages_dir)
    if not root.is_dir():
        _fail(f"pages directory not found: {pages_dir}")
    found = sorted(root.glob(f"page_*{PAGE_SUFFIX}"))
    if not found:
        _fail(f"no page_*{PAGE_SUFFIX} files in {pages_dir}")
    return [(p.name[:-len(PAGE_SUFFIX)], p) for p in found]


@main.command("run")
@click.option("--pages", "pages_dir", required=True, metavar="DIR")
@click.option("--out", "out_dir", required=True, metavar="DIR")
@click.option("--tagger", default=None, metavar="SPEC",
              help="'heuristic' or 'file:<dir>' with per-page tag files")
@click.option("--no-hybrid", is_flag=True, help="skip the domain cleanup rules")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--strict", is_flag=True, help="exit 1 if any page fails")
@_grouping_options
@_decode_options
@_config_option
@_server_option
@_command
def run_cmd(pages_dir: str, out_dir: str, tagger, no_hybrid, jobs, strict,
            eps_y, eps_x, min_pts, col_gap, merge_gap, no_i_start,
            config_path, server) -> None:
    """Extract entities for every page in a corpus directory."""
    pc, tagger_spec = _resolve(config_path, eps_y=eps_y, eps_x=eps_x,
                               min_pts=min_pts, col_gap=col_gap,
                               merge_gap=merge_gap, no_i_start=no_i_start,
                               no_hybrid=no_hybrid, tagger=tagger)
    if jobs < 1:
        _fail("--jobs must be >= 1")
    pages = _corpus_pages(pages_dir)

    per_page_tags: dict[str, Path] = {}
    if tagger_spec.startswith("file:"):
        tag_root = Path(tagger_spec[len("file:"):])
        missing = []
        for stem, _ in pages:
            tag_path = tag_root / f"{stem}{TAGS_SUFFIX}"
            if not tag_path.is_file():
                missing.append(str(tag_path))
            per_page_tags[stem] = tag_path
        if missing:
            _fail("missing prediction files: " + ", ".join(missing))
    elif tagger_spec != "heuristic":
        _fail(f"unknown tagger {tagger_spec!r}")

    def work(item: tuple[str, Path]):
        stem, path = item
        try:
            if server:
                payload = {"page": refex_io.load_json(path),
                           "params": _wire_params(pc, tagger_spec)}
                return stem, _post(server, "/v1/extract", payload), None
            page = refex_io.read_page(path)
            if per_page_tags:
                tg = FileTagger(refex_io.read_predictions(per_page_tags[stem]))
            else:
                tg = build_tagger(tagger_spec)
            result = pipeline.extract_page(page, tg, pc)
            return stem, refex_io.entities_to_dict(page, result.selected), None
        except (RefexError, OSError) as exc:
            return stem, None, f"{type(exc).__name__}: {exc}"

    if jobs == 1:
        results = [work(item) for item in pages]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, pages))

    out = Path(out_dir)
    failures = 0
    for stem, data, err in results:       # input order == page order
        if err is not None:
            failures += 1
            click.echo(f"{stem}: {err}", err=True)
            continue
        refex_io.dump_json(data, out / f"{stem}{ENTITIES_SUFFIX}")
    click.echo(f"processed {len(results) - failures}/{len(results)} pages"
               + (f", {failures} failed" if failures else ""))
    if failures and strict:
        raise SystemExit(1)


@main.command("eval")
@click.option("--pages", "pages_dir", required=True, metavar="DIR")
@click.option("--entities", "entities_dir", required=True, metavar="DIR")
@click.option("--gold", "gold_dir", default=None, metavar="DIR",
              help="directory with *.gold.json [same as --pages]")
@click.option("--out", "out_path", default=None, metavar="FILE",
              help="write the report JSON here")
@click.option("--muc5-mode", type=click.Choice(sorted(muc5.MODES)), default=None,
              help=f"score interpretation [{muc5.DEFAULT_MODE}]")
@click.option("--strict", is_flag=True, help="exit 1 if any page fails")
@_config_option
@_command
def eval_cmd(pages_dir: str, entities_dir: str, gold_dir, out_path,
             muc5_mode, strict, config_path) -> None:
    """Score extracted entities against gold annotations."""
    pc, _ = _resolve(config_path, muc5_mode=muc5_mode)
    pages = _corpus_pages(pages_dir)
    gold_root = Path(gold_dir) if gold_dir else Path(pages_dir)
    ent_root = Path(entities_dir)

    missing = []
    for stem, _ in pages:
        for path in (gold_root / f"{stem}{GOLD_SUFFIX}",
                     ent_root / f"{stem}{ENTITIES_SUFFIX}"):
            if not path.is_file():
                missing.append(str(path))
    if missing:
        _fail("missing files: " + ", ".join(missing))

    page_counts = []
    failures = 0
    for stem, path in pages:
        try:
            page = refex_io.read_page(path)
            gold = refex_io.read_annotations(gold_root / f"{stem}{GOLD_SUFFIX}",
                                             page=page)
            ent = refex_io.read_entities(ent_root / f"{stem}{ENTITIES_SUFFIX}")
            spans = [rec.span for rec in ent.entities]
            page_counts.append(pipeline.score_spans(page, spans, gold))
        except (RefexError, OSError) as exc:
            failures += 1
            click.echo(f"{stem}: {type(exc).__name__}: {exc}", err=True)
    report = pipeline.evaluate_pages(page_counts, mode=pc.muc5_mode)
    if out_path:
        refex_io.write_report(report, out_path)
    click.echo(muc5.render_tables({"default": report}))
    if failures:
        click.echo(f"{failures} page(s) failed to score", err=True)
        if strict:
            raise SystemExit(1)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@_command
def serve_cmd(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
