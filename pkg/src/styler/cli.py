"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 I/O error,
4 numeric/training failure. Flags are long-form only; the model directory
resolves flag > STYLER_MODEL_DIR > none.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import blade, pipeline, procedural, training
from .errors import (
    ConfigurationError,
    FormatError,
    InvalidInputError,
    NumericError,
    ScoringError,
    StateError,
    StylerError,
)
from .image import Image, luma_chroma_to_rgb, read_png, rgb_to_luma_chroma, write_png

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _set_thread_cap(threads: int | None):
    if not threads:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=threads)
    except ImportError:
        pass


def _model_dir(args) -> Path | None:
    if getattr(args, "model_dir", None):
        return Path(args.model_dir)
    env = os.environ.get("STYLER_MODEL_DIR")
    return Path(env) if env else None


def _load_models(args) -> dict:
    directory = _model_dir(args)
    if directory is None:
        return {}
    if not directory.is_dir():
        raise FileNotFoundError(f"model directory {directory} does not exist")
    models = {}
    for path in sorted(directory.glob("*.bld")):
        models[path.stem] = blade.load_model(path)
    return models


def _on_luma_image(img: Image, fn):
    if img.channels == 1:
        return fn(img)
    yuv = rgb_to_luma_chroma(img)
    out = fn(yuv)
    clipped = Image(np.clip(out.planes, 0.0, 1.0), yuv.chroma)
    return luma_chroma_to_rgb(clipped)


def _cmd_apply(args) -> int:
    style = pipeline.load_style(args.style)
    diags = pipeline.validate(style)
    if diags:
        for d in diags:
            print(f"{d.layer}[{d.index}] {d.code}: {d.message}", file=sys.stderr)
        return EXIT_VALIDATION
    img = read_png(getattr(args, "in"))
    models = _load_models(args)
    out = pipeline.execute(style, img, models)
    write_png(out, args.out)
    return EXIT_OK


def _parse_effect_params(args) -> dict:
    params = {}
    for key in ("length", "passes", "steps", "dt", "sigma", "p", "lic_length", "delta", "sigma_base"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return params


def _cmd_train(args) -> int:
    inputs = Path(args.inputs)
    paths = sorted(
        p for p in inputs.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    )
    if not paths:
        raise FileNotFoundError(f"no training images in {inputs}")
    images = [read_png(p) for p in paths]
    model = training.train_effect(
        args.effect,
        images,
        side=args.side,
        orientation_bins=args.obins,
        strength_bins=args.sbins,
        coherence_bins=args.cbins,
        rho=args.rho,
        lam=getattr(args, "lambda"),
        effect_params=_parse_effect_params(args),
        name=Path(args.out).stem,
        progress=(lambda msg: print(msg, file=sys.stderr)) if args.verbose else None,
    )
    blade.save_model(model, args.out)
    print(f"trained {args.effect}: {model.bucket_count} filters of {model.side}x{model.side}")
    return EXIT_OK


def _cmd_infer(args) -> int:
    model = blade.load_model(args.model)
    img = read_png(getattr(args, "in"))
    passes = args.passes

    def run(gray):
        return blade.infer(Image(gray.planes, None), model, passes=passes, clip=True)

    out = _on_luma_image(img, lambda yuv: run(yuv))
    write_png(out, args.out)
    return EXIT_OK


def _cmd_collage(args) -> int:
    model = blade.load_model(args.model)
    write_png(blade.render_collage(model), args.out)
    return EXIT_OK


def _cmd_bench(args) -> int:
    style = pipeline.load_style(args.style)
    img = read_png(getattr(args, "in"))
    models = _load_models(args)
    report = pipeline.benchmark(style, img, repeats=args.repeats, models=models)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"pixels: {report['pixels']}  repeats: {report['repeats']}")
        for row in report["rows"]:
            print(
                f"  {row['layer']:>10} {row['kind']:<18} "
                f"{row['seconds'] * 1e3:9.2f} ms  {row['megapixels_per_second']:9.2f} MP/s"
            )
        print(
            f"  total: {report['total_seconds'] * 1e3:.2f} ms "
            f"({report['total_megapixels_per_second']:.2f} MP/s)"
        )
    return EXIT_OK


def _parse_seed_range(text: str):
    if ".." in text:
        a, b = text.split("..", 1)
        return range(int(a), int(b) + 1)
    return range(int(text), int(text) + 1)


def _cmd_gen(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for seed in _parse_seed_range(args.seeds):
        style = procedural.generate(seed)
        pipeline.save_style(style, out_dir / f"{style.name}.json")
    print(f"wrote styles to {out_dir}")
    return EXIT_OK


def _cmd_score(args) -> int:
    style_dir = Path(args.dir)
    style_paths = sorted(style_dir.glob("*.json"))
    if not style_paths:
        raise FileNotFoundError(f"no style files in {style_dir}")
    image_paths = sorted(Path(args.images).glob("*.png"))
    if not image_paths:
        raise FileNotFoundError(f"no PNG images in {args.images}")
    images = [read_png(p) for p in image_paths]
    models = _load_models(args)
    results = []
    failures = 0
    for path in style_paths:
        style = pipeline.load_style(path)
        try:
            value = procedural.score(style, images, scorer=args.scorer, models=models)
            results.append({"style": path.stem, "score": value})
        except ScoringError as e:
            failures += 1
            results.append({"style": path.stem, "score": None, "error": str(e)})
    if args.json:
        print(json.dumps(results, indent=2))
    else:
        for row in results:
            if row["score"] is None:
                print(f"{row['style']}: unscored ({row['error']})")
            else:
                print(f"{row['style']}: {row['score']:.3f}")
    if args.report:
        styles = [pipeline.load_style(p) for p in style_paths]
        scores = [row["score"] for row in results]
        procedural.contact_sheet(
            styles,
            images[0],
            args.report,
            scores=scores,
            models=models,
            sort_by_score=args.sorted,
        )
        print(f"report: {Path(args.report) / 'report.html'}", file=sys.stderr)
    return EXIT_OK if failures == 0 else EXIT_NUMERIC


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(
        image_dir=args.image_dir,
        model_dir=_model_dir(args),
        style_dir=args.style_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="styler", description="Composable image stylization")
    parser.add_argument("--threads", type=int, default=None, help="cap worker/BLAS threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("apply", help="render a style file onto an image")
    p.add_argument("--style", required=True)
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model-dir", default=None)
    p.set_defaults(fn=_cmd_apply)

    p = sub.add_parser("train", help="train a fast approximation of an effect")
    p.add_argument("--effect", required=True, choices=sorted(training.EFFECTS))
    p.add_argument("--inputs", required=True, help="directory of training images")
    p.add_argument("--out", required=True, help="output model path (.bld)")
    p.add_argument("--side", type=int, default=None)
    p.add_argument("--obins", type=int, default=None)
    p.add_argument("--sbins", type=int, default=None)
    p.add_argument("--cbins", type=int, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--lambda", type=float, default=None, dest="lambda")
    p.add_argument("--length", type=float, default=None)
    p.add_argument("--passes", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--lic-length", type=float, default=None, dest="lic_length")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--sigma-base", type=float, default=None, dest="sigma_base")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("infer", help="apply a trained model to an image")
    p.add_argument("--model", required=True)
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--passes", type=int, default=None)
    p.set_defaults(fn=_cmd_infer)

    p = sub.add_parser("collage", help="render a model's filter bank as a table")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_collage)

    p = sub.add_parser("bench", help="time a style per block")
    p.add_argument("--style", required=True)
    p.add_argument("--in", required=True)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--model-dir", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("gen", help="generate procedural styles")
    p.add_argument("--seeds", required=True, help="seed or inclusive range A..B")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("score", help="score style files over images")
    p.add_argument("--dir", required=True, help="directory of style JSON files")
    p.add_argument("--images", required=True, help="directory of PNG images")
    p.add_argument("--scorer", default=None, help="external scorer command")
    p.add_argument("--model-dir", default=None)
    p.add_argument("--report", default=None, help="write an HTML contact sheet here")
    p.add_argument("--sorted", action="store_true", help="sort the report by score")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("serve", help="run the interactive preview server")
    p.add_argument("--port", type=int, default=8645)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--image-dir", required=True)
    p.add_argument("--model-dir", default=None)
    p.add_argument("--style-dir", default=None, help="where saved styles live")
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _set_thread_cap(args.threads)
    try:
        return args.fn(args)
    except (InvalidInputError, ConfigurationError, StateError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, ScoringError) as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except StylerError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
