"""Command-line entry point.

Subcommands mirror the pipeline: inspect, convert, stats, train, sample,
play, serve. Every failure prints one greppable ``error: <code>: <message>``
line to stderr; exit codes are 0 success, 1 usage, 2 parse/data,
3 protocol/network, 4 numerical.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .datasets import build_window_sets, compute_stats, load_descriptor, save_stats
from .errors import NumericalError, ParseError, ProtocolError
from .formats import from_canonical, load_clip, parse_bvh, to_canonical, write_bvh
from .models import EvalReport, load as load_model, sample as sample_model, save as save_model, train_on_dataset
from .protocol import DEFAULT_PORT, parse_address, play, serve
from .skeleton import Skeleton


def main(argv=None) -> int:
    code = run(sys.argv[1:] if argv is None else argv)
    return code


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        args.handler(args)
    except ProtocolError as exc:
        return _fail(exc.code, exc.reason, 3)
    except (ConnectionError, TimeoutError) as exc:
        return _fail("network", str(exc), 3)
    except NumericalError as exc:
        return _fail("numerical", str(exc), 4)
    except ParseError as exc:
        return _fail("parse", str(exc), 2)
    except ValueError as exc:
        return _fail("data", str(exc), 2)
    except OSError as exc:
        return _fail("io", str(exc), 2)
    except KeyboardInterrupt:
        print()
        return 0
    return 0


def _fail(code: str, message: str, exit_code: int) -> int:
    print(f"error: {code}: {message}", file=sys.stderr)
    return exit_code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motionkit",
        description="Skeleton animation toolkit: parse, train, sample, stream.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("inspect", help="print a clip file's joint tree and timing")
    p.add_argument("file")
    p.add_argument("--format-in", choices=["bvh", "canonical", "asfamc"], default=None)
    p.set_defaults(handler=_cmd_inspect)

    p = sub.add_parser("convert", help="convert a clip file between formats")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format-in", choices=["bvh", "canonical", "asfamc"], default=None)
    p.add_argument("--format-out", choices=["bvh", "canonical"], default=None)
    p.add_argument("--fps", type=float, default=None, help="override frame rate")
    p.set_defaults(handler=_cmd_convert)

    p = sub.add_parser("stats", help="compute normalization stats for a dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_stats)

    p = sub.add_parser("train", help="train a model on a dataset config")
    p.add_argument("--config", required=True)
    p.add_argument("--order", type=int, default=None, help="single AR order to fit")
    p.add_argument("--orders", default=None, help="comma-separated candidate orders; best kept")
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("sample", help="generate frames from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--seed-clip", required=True, help="clip whose last frames seed the rollout")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--label", default=None)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output clip file (.bvh or .canon)")
    p.add_argument("--then-play", metavar="ADDR", default=None, help="stream the result to a server")
    p.add_argument("--namespace", default=None, help="namespace for --then-play")
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("play", help="stream a clip to a receiving server")
    p.add_argument("--clip", required=True)
    p.add_argument("--connect", required=True, metavar="ADDR", help="host:port")
    p.add_argument("--namespace", required=True)
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--loop", action="store_true")
    p.set_defaults(handler=_cmd_play)

    p = sub.add_parser("serve", help="run the reference receiving server")
    p.add_argument("--addr", default=f"127.0.0.1:{DEFAULT_PORT}", metavar="ADDR")
    p.add_argument("--record", default=None, metavar="DIR", help="write received clips here")
    p.set_defaults(handler=_cmd_serve)

    return parser


# --- helpers -----------------------------------------------------------------

_FORMAT_EXT = {"bvh": ".bvh", "canonical": ".canon"}


def _load(path: str, format_override: str | None, fps: float | None = None):
    """Load a clip honoring --format-in by retargeting the extension."""
    frame_time = (1.0 / fps) if fps else None
    if format_override is None:
        return load_clip(path, frame_time=frame_time)
    text = Path(path).read_text(encoding="utf-8")
    if format_override == "bvh":
        skeleton, clip = parse_bvh(text)
    elif format_override == "canonical":
        skeleton, clip = from_canonical(text)
    else:  # asfamc: path must be the .amc; its .asf sits alongside
        return load_clip(path, frame_time=frame_time)
    if frame_time is not None and frame_time != clip.frame_time:
        clip = dataclasses.replace(clip, frame_time=frame_time)
    return skeleton, clip


def _joint_tree_lines(skeleton: Skeleton):
    depth = {}
    for idx, joint in enumerate(skeleton.joints):
        depth[idx] = 0 if joint.parent is None else depth[joint.parent] + 1
        marker = " (end)" if joint.is_end_site else ""
        channels = f" [{' '.join(joint.channels)}]" if joint.channels else ""
        yield f"{'  ' * depth[idx]}{joint.name}{marker}{channels}"


# --- subcommand handlers -----------------------------------------------------


def _cmd_inspect(args) -> None:
    skeleton, clip = _load(args.file, args.format_in)
    print(f"file: {args.file}")
    print(f"joints: {len(skeleton.joints)} ({len(skeleton.posed_joints)} posed)")
    print(f"channels: {skeleton.channel_count}")
    print(f"frames: {len(clip)}")
    print(f"frame_time: {clip.frame_time:.6f} s ({clip.fps:.3f} fps)")
    if clip.label is not None:
        print(f"label: {clip.label}")
    print("tree:")
    for line in _joint_tree_lines(skeleton):
        print(f"  {line}")


def _cmd_convert(args) -> None:
    skeleton, clip = _load(args.input, args.format_in, args.fps)
    out_path = Path(args.output)
    out_format = args.format_out
    if out_format is None:
        ext = out_path.suffix.lower()
        out_format = {"bvh": "bvh", ".bvh": "bvh", ".canon": "canonical"}.get(ext)
        if out_format is None:
            raise ValueError(f"cannot infer output format from {out_path.name!r}; use --format-out")
    text = write_bvh(skeleton, clip) if out_format == "bvh" else to_canonical(skeleton, clip)
    out_path.write_text(text, encoding="utf-8")
    print(f"wrote {out_path} ({len(clip)} frames, {skeleton.channel_count} channels)")


def _cmd_stats(args) -> None:
    descriptor = load_descriptor(args.config)
    build = build_window_sets(descriptor)
    stats = compute_stats(build.train) if not descriptor.normalize else build.stats
    save_stats(args.out, stats)
    print(f"dataset: {descriptor.name}")
    print(f"train windows: {len(build.train)}  val windows: {len(build.val)}")
    print(f"channels: {stats.channel_count}")
    print(f"wrote {args.out}")


def _cmd_train(args) -> None:
    if (args.order is None) == (args.orders is None):
        raise ValueError("pass exactly one of --order or --orders")
    if args.orders is not None:
        try:
            orders = [int(tok) for tok in args.orders.split(",") if tok.strip()]
        except ValueError:
            raise ValueError(f"bad --orders list {args.orders!r}") from None
    else:
        orders = [args.order]
    descriptor = load_descriptor(args.config)
    result = train_on_dataset(descriptor, orders)
    save_model(result.model, args.out)
    print(f"dataset: {descriptor.name}")
    for model, report in result.candidates:
        chosen = " *" if model is result.model else ""
        print(
            f"order {model.order}: one_step_mse {report.one_step_mse:.6e}  "
            f"joint_position_error {report.joint_position_error:.6e}{chosen}"
        )
    _print_report(result.report)
    print(f"wrote {args.out}")


def _print_report(report: EvalReport) -> None:
    for label, metrics in sorted(report.per_label.items(), key=lambda kv: str(kv[0])):
        name = label if label is not None else "(unlabeled)"
        print(
            f"  label {name}: mse {metrics.one_step_mse:.6e}  "
            f"jpe {metrics.joint_position_error:.6e}  windows {metrics.window_count}"
        )


def _cmd_sample(args) -> None:
    if (args.then_play is None) != (args.namespace is None):
        raise ValueError("--then-play and --namespace go together")
    model = load_model(args.model)
    _, seed_clip = load_clip(args.seed_clip)
    clip = sample_model(
        model,
        seed_clip,
        args.frames,
        temperature=args.temperature,
        rng_seed=args.rng_seed,
        label=args.label,
    )
    out_path = Path(args.out)
    if out_path.suffix.lower() not in (".bvh", ".canon"):
        raise ValueError("--out must end in .bvh or .canon")
    text = write_bvh(clip.skeleton, clip) if out_path.suffix.lower() == ".bvh" else to_canonical(clip.skeleton, clip)
    out_path.write_text(text, encoding="utf-8")
    print(f"wrote {out_path} ({len(clip)} generated frames)")
    if args.then_play is not None:
        summary = play(clip, args.then_play, args.namespace)
        print(f"streamed {summary.frames_sent} frames in {summary.duration:.3f} s")


def _cmd_play(args) -> None:
    _, clip = load_clip(args.clip)
    summary = play(clip, args.connect, args.namespace, fps=args.fps, loop=args.loop)
    print(
        f"streamed {summary.frames_sent} frames to {args.connect} "
        f"namespace {summary.namespace} in {summary.duration:.3f} s"
    )


def _cmd_serve(args) -> None:
    host, port = parse_address(args.addr)
    server = serve((host, port), record_dir=args.record)
    bound_host, bound_port = server.address
    print(f"listening on {bound_host}:{bound_port}" + (f", recording to {args.record}" if args.record else ""))
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()


if __name__ == "__main__":
    raise SystemExit(main())
