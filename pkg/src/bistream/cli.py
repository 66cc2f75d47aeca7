"""Command-line surface: gen / denoise / verify / profile / rerun.

Every run that writes outputs also writes a manifest JSON next to them with
the full argument vector, seeds and engine version; `rerun MANIFEST`
reproduces the outputs bitwise.  Exit codes: 0 pass, 1 verification failure,
2 usage or I/O error.  Setting BSVD_TRACE=1 streams the per-step pipeline
trace CSV to stderr.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, FormatError, StateError
from .fastdvd import CascadeStage, op_count_report, sliding_forward, streaming_forward
from .metrics import per_frame_report
from .model import (
    ModelConfig,
    build_unet,
    build_wnet,
    init_weights,
    load_model_config,
    load_weights,
    make_noise_map,
)
from .noise import NoiseSpec, add_noise
from .offline import forward_clipped_mimo, forward_full_sequence
from .pipeline import StreamSession, analyze, compile_pipeline, run_stream
from .seqio import read_ppm, read_sequence, write_ppm, write_sequence
from .synth import PATTERNS, generate_sequence
from .tensor import conv_call_count, reset_conv_call_count

DENOISE_MODES = ("offline_full", "offline_mimo", "pipeline", "unidirectional")


def _write_manifest(path, command, argv, **extra):
    payload = {"engine_version": __version__, "command": command, "argv": list(argv)}
    payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _noise_spec(args) -> NoiseSpec:
    if args.het_a is not None or args.het_b is not None:
        if args.het_a is None or args.het_b is None:
            raise ConfigError("heteroscedastic noise needs both --het-a and --het-b")
        return NoiseSpec.heteroscedastic(args.het_a, args.het_b, seed=args.seed)
    return NoiseSpec.awgn(args.sigma, seed=args.seed)


def _cmd_gen(args, argv) -> int:
    clean = generate_sequence(args.t, args.height, args.width, args.channels,
                              args.pattern, args.seed)
    noisy = add_noise(clean, _noise_spec(args))
    clean_path = f"{args.out}.clean.bsq"
    noisy_path = f"{args.out}.noisy.bsq"
    write_sequence(clean_path, clean)
    write_sequence(noisy_path, noisy)
    _write_manifest(
        f"{args.out}.manifest.json", "gen", argv,
        seeds={"sequence": args.seed},
        outputs=[clean_path, noisy_path],
    )
    print(f"wrote {clean_path} and {noisy_path} ({args.t} frames, "
          f"{args.channels}x{args.height}x{args.width})")
    return 0


def _load_net_and_weights(args):
    cfg = load_model_config(args.model) if args.model else ModelConfig()
    if args.mode == "unidirectional":
        cfg.fusion_mode = "unidirectional"
    net = build_wnet(cfg)
    if args.weights:
        store = load_weights(args.weights, net)
    else:
        store = init_weights(net, args.seed)
    return cfg, net, store


def _prepare_inputs(net, frames, sigma):
    c_model = net.input_channels
    c_seq = frames[0].shape[0]
    if c_model == c_seq:
        return frames  # blind: the RGB (or raw) channels only, no map anywhere
    if c_model == c_seq + 1:
        if sigma is None:
            raise ConfigError(f"model wants {c_model} channels, sequence has {c_seq}: "
                              f"pass --sigma for the noise map")
        nm = make_noise_map(sigma, frames[0].shape[1], frames[0].shape[2])
        return [np.concatenate([fr, nm], axis=0) for fr in frames]
    raise ConfigError(f"sequence has {c_seq} channels but the model expects {c_model}")


def _read_input(path):
    """A .bsq sequence file, or a directory of .ppm/.pgm frames (8-bit view)."""
    p = Path(path)
    if p.is_dir():
        names = sorted(q for q in p.iterdir() if q.suffix in (".ppm", ".pgm"))
        if not names:
            raise ConfigError(f"no .ppm/.pgm frames in {path}")
        return [read_ppm(q) for q in names]
    return read_sequence(path)


def _cmd_denoise(args, argv) -> int:
    cfg, net, store = _load_net_and_weights(args)
    noisy = _read_input(args.input)
    inputs = _prepare_inputs(net, noisy, args.sigma)
    trace = sys.stderr if os.environ.get("BSVD_TRACE") == "1" else None
    flush_mode = "exact_eos" if args.flush == "exact" else "paper_zero_frames"
    if args.mode == "offline_full":
        outs = forward_full_sequence(net, store, inputs)
    elif args.mode == "offline_mimo":
        if args.t_clip is None:
            raise ConfigError("--t-clip is required for offline_mimo")
        outs = forward_clipped_mimo(net, store, inputs, args.t_clip)
    else:  # pipeline or unidirectional
        outs = run_stream(net, store, inputs, flush_mode, trace=trace)
    outs = [np.clip(o, 0.0, 1.0).astype(np.float32) for o in outs]
    write_sequence(args.out, outs)
    if args.dump_ppm:
        Path(args.dump_ppm).mkdir(parents=True, exist_ok=True)
        for i, fr in enumerate(outs):
            write_ppm(Path(args.dump_ppm) / f"frame_{i:05d}.ppm", fr)
    _write_manifest(
        f"{args.out}.manifest.json", "denoise", argv,
        mode=args.mode, flush=args.flush, t_clip=args.t_clip,
        seeds={"weights": None if args.weights else args.seed},
        config_paths={"model": args.model, "weights": args.weights},
        inputs=[args.input], outputs=[args.out],
    )
    print(f"wrote {args.out} ({len(outs)} frames, mode={args.mode})")
    return 0


def _cmd_verify(args) -> int:
    a = read_sequence(args.a)
    b = read_sequence(args.b)
    if len(a) != len(b):
        print(f"error: sequence lengths differ: {len(a)} vs {len(b)}", file=sys.stderr)
        return 2
    if any(x.shape != y.shape for x, y in zip(a, b)):
        print("error: frame shapes differ", file=sys.stderr)
        return 2
    maxabs = [float(np.max(np.abs(x - y))) for x, y in zip(a, b)]
    if args.clean:
        clean = read_sequence(args.clean)
        if len(clean) != len(a):
            print(f"error: clean length {len(clean)} differs from {len(a)}", file=sys.stderr)
            return 2
        report = per_frame_report(clean, a, b)
        csv_text = report.to_csv()
        summary = json.loads(report.to_json())
    else:
        lines = ["frame,maxabs"] + [f"{i},{m:.9g}" for i, m in enumerate(maxabs)]
        csv_text = "\n".join(lines) + "\n"
        summary = {"frames": len(a)}
    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        out_fh.write(csv_text)
    finally:
        if args.out:
            out_fh.close()
    worst = max(maxabs)
    summary.update({"max_abs_diff": worst, "threshold": args.threshold})
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if worst <= args.threshold:
        print(f"verify: max abs diff {worst:.9g} within threshold {args.threshold:.9g}",
              file=sys.stderr)
        return 0
    print(f"verify: max abs diff {worst:.9g} exceeds threshold {args.threshold:.9g}",
          file=sys.stderr)
    return 1


def _profile_pipeline(net, store, t_values, height, width, seed):
    graph = compile_pipeline(net)
    report = analyze(graph, height, width)
    runs = {}
    for t in t_values:
        frames = generate_sequence(t, height, width, net.input_channels, "translate", seed)
        sess = StreamSession(graph, store)
        reset_conv_call_count()
        state_sizes = set()
        for i, fr in enumerate(frames):
            sess.step(fr)
            if i >= graph.n_blocks:
                state_sizes.add(sess.state_bytes())
        sess.flush()
        runs[str(t)] = {
            "state_bytes": sorted(state_sizes),
            "conv_evals_per_frame": conv_call_count() / t,
        }
    return {"analysis": report, "runs": runs}


def _profile_mimo(net, store, t_clips, height, width, seed):
    out = {}
    for t_clip in t_clips:
        frames = generate_sequence(t_clip, height, width, net.input_channels, "translate", seed)
        stats = {}
        reset_conv_call_count()
        forward_clipped_mimo(net, store, frames, t_clip, stats=stats)
        out[str(t_clip)] = {
            "activation_bytes": stats["peak_activation_bytes"],
            "conv_evals_per_frame": conv_call_count() / t_clip,
        }
    return out


def _profile_fdvd(height, width, seed, t: int = 12):
    frame_ch = 3
    stage_net = build_unet(3 * frame_ch, 8, frame_ch, fusion_mode="none")
    store1 = init_weights(stage_net, seed)
    store2 = init_weights(stage_net, seed + 1)
    frames = generate_sequence(t, height, width, frame_ch, "translate", seed)
    s1, s2 = CascadeStage(stage_net, store1), CascadeStage(stage_net, store2)
    sliding_forward(s1, s2, frames)
    slide = op_count_report("sliding", t, s1.evals, s2.evals)
    s1.evals = s2.evals = 0
    streaming_forward(s1, s2, frames)
    pipe = op_count_report("pipeline", t, s1.evals, s2.evals)
    return {"sliding": slide, "pipeline": pipe,
            "ratio": slide["per_frame"] / pipe["per_frame"]}


def _cmd_profile(args) -> int:
    cfg = load_model_config(args.model) if args.model else ModelConfig(base_channels=8)
    net = build_wnet(cfg)
    store = init_weights(net, args.seed)
    t_values = args.t or [32, 64]
    t_clips = args.t_clip or [8, 16]
    offline_net_evals = {}
    frames = generate_sequence(min(t_values), args.height, args.width,
                               net.input_channels, "translate", args.seed)
    reset_conv_call_count()
    forward_full_sequence(net, store, frames)
    offline_net_evals["conv_evals_per_frame"] = conv_call_count() / len(frames)
    payload = {
        "engine_version": __version__,
        "model": {"base_channels": cfg.base_channels, "input_channels": cfg.input_channels,
                  "shift_ratio": cfg.shift_ratio, "fusion_mode": cfg.fusion_mode},
        "frame_size": [args.height, args.width],
        "pipeline": _profile_pipeline(net, store, t_values, args.height, args.width, args.seed),
        "offline_full": offline_net_evals,
        "mimo": _profile_mimo(net, store, t_clips, args.height, args.width, args.seed),
        "fdvd": _profile_fdvd(args.height, args.width, args.seed),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_rerun(args) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    argv = manifest.get("argv")
    if not argv:
        print("error: manifest has no argv to replay", file=sys.stderr)
        return 2
    return main(argv)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bistream",
                                description="streaming video denoising engine")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a clean/noisy synthetic sequence pair")
    g.add_argument("--t", type=int, required=True, help="frame count")
    g.add_argument("--height", type=int, default=32)
    g.add_argument("--width", type=int, default=32)
    g.add_argument("--channels", type=int, default=3)
    g.add_argument("--pattern", choices=PATTERNS, default="translate")
    g.add_argument("--sigma", type=float, default=25.0,
                   help="AWGN level on the 0-255 scale (divided by 255 internally)")
    g.add_argument("--het-a", type=float, default=None, help="shot-noise coefficient")
    g.add_argument("--het-b", type=float, default=None, help="read-noise floor")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output path prefix")

    d = sub.add_parser("denoise", help="denoise a sequence file")
    d.add_argument("input", help="noisy .bsq sequence")
    d.add_argument("--model", default=None, help="model config file (key=value)")
    d.add_argument("--weights", default=None, help="weight file; omit to init from --seed")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--mode", choices=DENOISE_MODES, default="pipeline")
    d.add_argument("--t-clip", type=int, default=None, help="clip length for offline_mimo")
    d.add_argument("--flush", choices=("paper", "exact"), default="exact")
    d.add_argument("--sigma", type=float, default=None,
                   help="noise-map level for non-blind models")
    d.add_argument("--out", required=True)
    d.add_argument("--dump-ppm", default=None, help="also write 8-bit PPM frames here")

    v = sub.add_parser("verify", help="compare two sequence files")
    v.add_argument("a")
    v.add_argument("b")
    v.add_argument("--clean", default=None, help="clean reference for PSNR/SSIM")
    v.add_argument("--threshold", type=float, default=0.0)
    v.add_argument("--out", default=None, help="write the CSV here instead of stdout")
    v.add_argument("--json-out", default=None, help="write the JSON summary here")

    f = sub.add_parser("profile", help="report state/activation bytes and op counts")
    f.add_argument("--model", default=None)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--height", type=int, default=16)
    f.add_argument("--width", type=int, default=16)
    f.add_argument("--t", type=int, action="append", help="stream length (repeatable)")
    f.add_argument("--t-clip", type=int, action="append", help="MIMO clip length (repeatable)")
    f.add_argument("--out", default=None)

    r = sub.add_parser("rerun", help="replay a run from its manifest")
    r.add_argument("manifest")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args, argv)
        if args.command == "denoise":
            return _cmd_denoise(args, argv)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "profile":
            return _cmd_profile(args)
        if args.command == "rerun":
            return _cmd_rerun(args)
    except (ConfigError, FormatError, StateError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
