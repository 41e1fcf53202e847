"""Command-line frontend.

Machine-readable output (JSON by default, ``--format table`` where a table
makes sense) goes to stdout; progress and diagnostics go to stderr. Exit
codes: 0 success, 1 runtime failure, 2 usage error. Output never includes
wall-clock time, so identical inputs and flags produce identical bytes.
"""

import argparse
import asyncio
import json
import os
import socket
import sys
import time

from .errors import PosemimeError
from .gmm import TrainingConfig, dumps_17g, fit_em, generate_trajectory, load_model, save_model
from .ingestion import (
    convert_estimator_doc,
    coverage,
    decode_frame_line,
    encode_frame,
    read_recorded_sequence,
    drop_incomplete,
)
from .scoring import calibrate, load_calibration, save_calibration, score_sequence
from .session import SessionConfig, load_gesture_library
from .skeleton import Body14Frame, EncodingKind, Keypoint, PoseEncoding, encode_sequence, pose_point_to_joints


def _progress(message):
    print(message, file=sys.stderr)


def _emit(doc):
    print(dumps_17g(doc))


def _require_file(path):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _require_dir(path):
    if not os.path.isdir(path):
        raise FileNotFoundError(f"no such directory: {path}")
    return path


def _encoding_from_flag(name):
    return PoseEncoding(EncodingKind(name), 2)


def _load_demo_sequences(directory, encoding):
    paths = sorted(
        os.path.join(directory, n) for n in os.listdir(directory) if n.endswith(".ndjson")
    )
    if not paths:
        raise FileNotFoundError(f"no .ndjson demo files in {directory}")
    sequences = []
    total_dropped = 0
    for path in paths:
        frames = read_recorded_sequence(path)
        kept, dropped = drop_incomplete(frames)
        total_dropped += dropped
        if dropped:
            _progress(f"{path}: dropped {dropped} incomplete frame(s)")
        if len(kept) < 2:
            raise PosemimeError(f"{path}: fewer than 2 complete frames")
        sequences.append(encode_sequence(kept, encoding))
    return sequences, total_dropped, paths


def _cmd_train(args):
    _require_dir(args.demos)
    encoding = _encoding_from_flag(args.encoding)
    sequences, dropped, paths = _load_demo_sequences(args.demos, encoding)
    config = TrainingConfig(components=args.components, seed=args.seed)
    _progress(f"training on {len(sequences)} demo(s) from {args.demos}")
    model = fit_em(sequences, config, encoding)
    save_model(model, args.out)
    _emit(
        {
            "model": args.out,
            "demos": len(paths),
            "dropped_frames": dropped,
            "iterations": model.training_meta.iterations,
            "avg_log_likelihood": model.training_meta.final_avg_log_likelihood,
        }
    )
    return 0


def _cmd_calibrate(args):
    model = load_model(_require_file(args.model))
    _require_dir(args.demos)
    sequences, dropped, _ = _load_demo_sequences(args.demos, model.encoding)
    cal = calibrate(model, sequences, margin_multiplier=args.margin)
    save_calibration(cal, args.out)
    _emit(
        {
            "calibration": args.out,
            "threshold": cal.threshold,
            "demo_scores": cal.demo_scores,
            "dropped_frames": dropped,
        }
    )
    return 0


def _cmd_score(args):
    model = load_model(_require_file(args.model))
    cal = load_calibration(_require_file(args.calibration)) if args.calibration else None
    frames = read_recorded_sequence(_require_file(args.input))
    kept, dropped = drop_incomplete(frames)
    if not kept:
        raise PosemimeError("every frame was incomplete; nothing to score")
    report = score_sequence(encode_sequence(kept, model.encoding), model, cal)
    doc = report.to_json()
    doc["dropped_frames"] = dropped
    if args.format == "table":
        print(f"frames          {report.frame_count}")
        print(f"dropped         {dropped}")
        print(f"total log-lik   {report.total_log_likelihood:.6f}")
        print(f"normalized      {report.normalized_score:.6f}")
        if report.verdict is not None:
            print(f"verdict         {report.verdict.value}")
    else:
        _emit(doc)
    return 0


def _cmd_generate(args):
    model = load_model(_require_file(args.model))
    trajectory = generate_trajectory(model, args.frames)
    with open(args.out, "w", encoding="utf-8") as fh:
        for t, point, _cov in trajectory:
            joints = pose_point_to_joints(point, model.encoding)
            keypoints = [Keypoint(row.copy(), 1.0) for row in joints]
            fh.write(encode_frame(Body14Frame(timestamp=t, keypoints=keypoints)))
            fh.write("\n")
    _emit({"out": args.out, "frames": args.frames})
    return 0


def _load_frames_any(path):
    """Wire-format NDJSON or an estimator JSON export, by sniffing."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        return convert_estimator_doc(text)
    frames = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            frames.append(decode_frame_line(line))
        except PosemimeError as exc:
            raise PosemimeError(f"{path}:{number}: {exc}") from None
    return frames


def _cmd_coverage(args):
    frames = _load_frames_any(_require_file(args.input))
    report = coverage(frames)
    if args.format == "table":
        print(f"{'frame':>8}  {'detected':>8}  {'percent':>7}")
        for row in report.rows:
            print(f"{row.label:>8}  {row.detected:>8}  {row.percent:>6}%")
    else:
        _emit({"rows": report.to_json()})
    return 0


def _cmd_convert(args):
    with open(_require_file(args.input), "r", encoding="utf-8") as fh:
        text = fh.read()
    frames = convert_estimator_doc(text)
    with open(args.out, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(encode_frame(frame))
            fh.write("\n")
    _emit({"out": args.out, "frames": len(frames)})
    return 0


def _cmd_replay(args):
    frames = read_recorded_sequence(_require_file(args.input))
    host, _, port = args.connect.rpartition(":")
    if not host or not port.isdigit():
        raise PosemimeError(f"--connect expects host:port, got {args.connect!r}")
    delay = 1.0 / args.rate if args.rate > 0 else 0.0
    with socket.create_connection((host, int(port))) as sock:
        stream = sock.makefile("rw", encoding="utf-8", newline="\n")
        stream.write(json.dumps({"session": args.session}) + "\n")
        stream.flush()
        reply = json.loads(stream.readline())
        if "error" in reply:
            raise PosemimeError(f"ingest endpoint rejected the binding: {reply['error']}")
        for frame in frames:
            stream.write(encode_frame(frame) + "\n")
            stream.flush()
            if delay:
                time.sleep(delay)
    _emit({"sent": len(frames)})
    return 0


def _parse_addr(value):
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {value!r}")
    return host, int(port)


def _cmd_serve(args):
    import uvicorn

    from .service import SessionService, create_app, serve_ingest

    library = load_gesture_library(_require_dir(args.gestures))
    if len(library) == 0:
        raise PosemimeError(f"no gesture models (*.model.json) found in {args.gestures}")
    service = SessionService(library, SessionConfig(), log_dir=args.log_dir)
    app = create_app(service)
    http_host, http_port = args.http
    ingest_host, ingest_port = args.ingest

    async def run():
        ingest_server = await serve_ingest(service, ingest_host, ingest_port)
        bound = ingest_server.sockets[0].getsockname()
        _progress(f"ingest listening on {bound[0]}:{bound[1]}")
        config = uvicorn.Config(app, host=http_host, port=http_port, log_level="warning")
        server = uvicorn.Server(config)
        _progress(f"http listening on {http_host}:{http_port}")
        try:
            await server.serve()
        finally:
            ingest_server.close()
            await ingest_server.wait_closed()

    asyncio.run(run())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="posemime",
        description="Gesture-imitation engine: train, score, generate, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a gesture model from recorded demos")
    p.add_argument("--demos", required=True, help="directory of .ndjson recordings")
    p.add_argument("--encoding", choices=["directions", "positions"], default="directions")
    p.add_argument("--components", type=int, default=5, metavar="K")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("calibrate", help="derive a pass threshold from demos")
    p.add_argument("--model", required=True)
    p.add_argument("--demos", required=True)
    p.add_argument("--margin", type=float, default=2.0, metavar="C")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("score", help="score a recorded sequence against a model")
    p.add_argument("--model", required=True)
    p.add_argument("--calibration")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("generate", help="emit the model's reference trajectory")
    p.add_argument("--model", required=True)
    p.add_argument("--frames", type=int, required=True, metavar="N")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("coverage", help="per-frame detected-part coverage")
    p.add_argument("--input", required=True, help="frames.ndjson or estimator.json")
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.set_defaults(func=_cmd_coverage)

    p = sub.add_parser("convert", help="estimator export to wire-format frames")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("replay", help="stream a recording to a running service")
    p.add_argument("--input", required=True)
    p.add_argument("--connect", required=True, metavar="HOST:PORT")
    p.add_argument("--session", required=True, metavar="ID")
    p.add_argument("--rate", type=float, default=30.0, help="frames per second; 0 = no pacing")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--http", type=_parse_addr, required=True, metavar="HOST:PORT")
    p.add_argument("--ingest", type=_parse_addr, required=True, metavar="HOST:PORT")
    p.add_argument("--gestures", required=True, help="directory of gesture models")
    p.add_argument("--log-dir", default="session-logs")
    p.set_defaults(func=_cmd_serve)

    return parser


def dispatch(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (PosemimeError, OSError, ValueError) as exc:
        _progress(f"error: {exc}")
        return 1


def main():
    raise SystemExit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
