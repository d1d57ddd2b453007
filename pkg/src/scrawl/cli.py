"""Command-line entry point.

Config precedence everywhere: explicit flags > --config file > environment
(SCRAWL_SEED, SCRAWL_THREADS) > built-in defaults.  All randomness flows
from the single --seed value.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from .corpus import CorpusError, DatasetManifest, generate_dataset, ingest_dir
from .errorpairs import NoiseChannelConfig, make_pairs, noise_channel
from .layout import PageSpec
from .metrics import MetricsError, NormalizationMode, evaluate, report_to_json_text
from .raster import RenderConfig
from .style import NS_NOISE, Rng, StyleConfig
from .templates import (
    TemplateError,
    TemplateParseError,
    TemplateValidationError,
    load_template_db,
    validate_glyph,
)

DEFAULT_DB = Path(__file__).parent / "data" / "examples_ru.json"


def _read_jsonl(path: Path) -> list[dict]:
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{ln}: invalid JSON ({exc.msg})") from exc
    return records


def _read_id_text(path: Path) -> dict[str, str]:
    out = {}
    for rec in _read_jsonl(path):
        if "id" not in rec or "text" not in rec:
            raise ValueError(f"{path}: records need 'id' and 'text' fields")
        out[str(rec["id"])] = str(rec["text"])
    return out


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    doc = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a JSON object")
    return doc


def _resolve(flag, cfg: dict, key: str, env: str | None, default, cast=int):
    if flag is not None:
        return flag
    if key in cfg:
        return cast(cfg[key])
    if env and os.environ.get(env):
        return cast(os.environ[env])
    return default


def cmd_validate(args) -> int:
    try:
        db = load_template_db(Path(args.db))
    except TemplateValidationError as exc:
        for v in exc.violations:
            print(f"{exc.glyph_id}: {v.code}: {v.message}")
        return 1
    except (OSError, TemplateParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    violations = 0
    for ch in sorted(db.glyphs):
        for glyph in db.glyphs[ch]:
            for v in validate_glyph(glyph):
                print(f"{glyph.glyph_id}: {v.code}: {v.message}")
                violations += 1
    if violations:
        return 1
    n = sum(len(v) for v in db.glyphs.values())
    print(f"ok: {len(db.charset)} characters, {n} glyph variants")
    return 0


def _page_spec_from_args(args, cfg: dict) -> PageSpec:
    page_cfg = cfg.get("page", {})
    return PageSpec(
        width_px=_resolve(args.page_width, page_cfg, "width_px", None, 1000),
        height_px=_resolve(args.page_height, page_cfg, "height_px", None, 1400),
        margin_px=_resolve(args.margin, page_cfg, "margin_px", None, 60),
        line_height=_resolve(args.line_height, page_cfg, "line_height", None, 2.6, float),
        px_per_unit=_resolve(args.px_per_unit, page_cfg, "px_per_unit", None, 28.0, float),
        has_ruled_lines=bool(_resolve(None, page_cfg, "has_ruled_lines", None, args.ruled)),
    )


def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    seed = _resolve(args.seed, cfg, "seed", "SCRAWL_SEED", 0)
    threads = _resolve(args.threads, cfg, "threads", "SCRAWL_THREADS", 1)
    pages = _resolve(args.pages, cfg, "pages", None, 10)
    if pages <= 0:
        print("error: --pages must be positive", file=sys.stderr)
        return 2

    try:
        db = load_template_db(Path(args.db))
    except (OSError, TemplateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.style:
        style = StyleConfig.from_json(Path(args.style))
    elif "style" in cfg:
        style = StyleConfig.from_json(json.dumps(cfg["style"]))
    else:
        style = StyleConfig()
    spec = _page_spec_from_args(args, cfg)
    render_cfg = RenderConfig(
        stroke_width_px=_resolve(args.stroke_width, cfg.get("render", {}), "stroke_width_px", None, 2.2, float),
        antialias=not args.no_antialias,
        ruled_line_gray=200 if spec.has_ruled_lines else None,
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    marker = out_dir / ".incomplete"
    marker.touch()
    try:
        result = ingest_dir(Path(args.corpus), db.renderable_charset(), punctuation=frozenset())
        if not result.sentences:
            print("error: corpus is empty after filtering", file=sys.stderr)
            return 1
        manifest = generate_dataset(
            result.sentences,
            db,
            style,
            spec,
            render_cfg,
            seed=seed,
            n_pages=pages,
            out_dir=out_dir,
            threads=threads,
            run_id=args.run_id,
        )
    except (CorpusError, TemplateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    marker.unlink()

    digest = hashlib.sha256((out_dir / "manifest.jsonl").read_bytes()).hexdigest()
    total_chars = sum(len(e.ground_truth) for e in manifest.entries)
    print(
        f"sentences: {result.report.accepted} accepted, {result.report.rejected} rejected"
    )
    print(f"pages: {len(manifest.entries)}, ground-truth chars: {total_chars}")
    print(f"manifest sha256: {digest}")
    return 0


def cmd_pairs(args) -> int:
    manifest = DatasetManifest.read_jsonl(Path(args.manifest))
    hyps_by_id = _read_id_text(Path(args.hyps))

    refs, hyps, ids = [], [], []
    unmatched = 0
    for entry in manifest.entries:
        stem = Path(entry.image_path).stem
        hyp = hyps_by_id.get(entry.image_path, hyps_by_id.get(stem))
        if hyp is None:
            hyp = hyps_by_id.get(str(entry.page_index))
        if hyp is None:
            unmatched += 1
            continue
        refs.append(entry.ground_truth)
        hyps.append(hyp)
        ids.append(stem)
    if not refs:
        print("error: no hypothesis ids matched the manifest", file=sys.stderr)
        return 1

    pairs = make_pairs(
        refs, hyps, window=args.window, keep_clean_ratio=args.keep_clean, seed=args.seed, ids=ids
    )
    out_path = Path(args.out)
    with out_path.open("w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(
                json.dumps(
                    {"pair_id": p.pair_id, "noisy": p.noisy, "clean": p.clean, "n_errors": p.n_errors},
                    ensure_ascii=False,
                )
                + "\n"
            )
    with_errors = sum(1 for p in pairs if p.n_errors > 0)
    print(f"records: {len(refs)} matched, {unmatched} unmatched")
    print(f"pairs: {len(pairs)} written ({with_errors} with errors)")
    return 0


def cmd_evaluate(args) -> int:
    refs = _read_id_text(Path(args.refs))
    hyps = _read_id_text(Path(args.hyps))
    joined = [(refs[i], hyps[i]) for i in refs if i in hyps]
    missing = len(refs) - len(joined)
    if not joined:
        print("error: no common ids between refs and hyps", file=sys.stderr)
        return 1
    if missing:
        print(f"warning: {missing} reference ids had no hypothesis", file=sys.stderr)
    modes = [NormalizationMode.parse(m) for m in args.modes.split(",")]
    try:
        report = evaluate(joined, modes)
    except MetricsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(report.format_table())
    if args.json:
        Path(args.json).write_text(report_to_json_text(report), encoding="utf-8")
    return 0


def cmd_noise(args) -> int:
    try:
        cfg = NoiseChannelConfig(
            sub_rate=args.sub, ins_rate=args.ins, del_rate=getattr(args, "del"), seed=args.seed
        )
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    if cfg.sub_rate + cfg.ins_rate + cfg.del_rate >= 1.0:
        print("usage error: combined rates must stay below 1", file=sys.stderr)
        return 2
    records = _read_id_text(Path(args.refs))
    with Path(args.out).open("w", encoding="utf-8") as fh:
        for idx, (rec_id, text) in enumerate(records.items()):
            noisy = noise_channel(text, cfg, Rng(cfg.seed).child(NS_NOISE, idx))
            fh.write(json.dumps({"id": rec_id, "text": noisy}, ensure_ascii=False) + "\n")
    print(f"noised {len(records)} records")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    ui_dir = Path(args.ui) if args.ui else None
    try:
        app = create_app(Path(args.db), ui_dir=ui_dir)
    except (OSError, TemplateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except OSError as exc:
        print(f"error: cannot bind port {args.port}: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scrawl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a template database")
    p.add_argument("db")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="render a synthetic handwriting dataset")
    p.add_argument("--corpus", required=True, help="directory of .txt documents")
    p.add_argument("--db", default=str(DEFAULT_DB))
    p.add_argument("--style", help="style config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--config", type=Path, help="JSON config file (seed/pages/threads/page/render/style)")
    p.add_argument("--seed", type=int)
    p.add_argument("--pages", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--run-id", default="run")
    p.add_argument("--page-width", type=int)
    p.add_argument("--page-height", type=int)
    p.add_argument("--margin", type=int)
    p.add_argument("--line-height", type=float)
    p.add_argument("--px-per-unit", type=float)
    p.add_argument("--ruled", action="store_true")
    p.add_argument("--stroke-width", type=float)
    p.add_argument("--no-antialias", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("pairs", help="mint correction pairs from manifest + hypotheses")
    p.add_argument("--manifest", required=True)
    p.add_argument("--hyps", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=90)
    p.add_argument("--keep-clean", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("evaluate", help="WAR/CAR report under normalization modes")
    p.add_argument("--refs", required=True)
    p.add_argument("--hyps", required=True)
    p.add_argument("--modes", default="raw,lowercase,alpha")
    p.add_argument("--json", help="also write machine-readable report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("noise", help="run the synthetic error channel over references")
    p.add_argument("--refs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sub", type=float, default=0.0)
    p.add_argument("--ins", type=float, default=0.0)
    p.add_argument("--del", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("serve", help="serve the template editor API")
    p.add_argument("--db", default=str(DEFAULT_DB))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--ui", help="directory with the built editor frontend")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
