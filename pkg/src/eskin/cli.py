"""Command-line entry point: gen, encode, train, eval, bench, serve.

Exit codes: 0 success, 1 runtime failure, 2 usage error. With --json the
result summary is printed as a single machine-readable JSON object on
stdout (schema name and version embedded in each payload).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

DEFAULT_SEED = 0


def _emit(args, payload, human_lines):
    if args.json:
        print(json.dumps(payload, indent=1))
    else:
        for line in human_lines:
            print(line)


def cmd_gen(args):
    from .dataset import build_dataset, save_dataset

    ds = build_dataset(per_class=args.per_class, n_styles=args.styles,
                       seed=args.seed, delta=args.delta)
    manifest = save_dataset(ds, args.out)
    payload = {
        "schema": "eskin.gen/1",
        "manifest": str(manifest),
        "samples": len(ds),
        "train": len(ds.train_idx),
        "test": len(ds.test_idx),
        "seed": args.seed,
        "delta": args.delta,
    }
    _emit(args, payload, [f"wrote {len(ds)} samples, manifest at {manifest}"])
    return 0


def cmd_encode(args):
    from .acquisition import acquire_sample
    from .codec import compression_stats, write_aer
    from .sensor import FrontEndConfig
    from .trajectories import gen_digit_trajectory, render_pressure

    if args.frames is not None:
        path = Path(args.frames)
        if not path.exists():
            raise FileNotFoundError(f"frames file not found: {path}")
        frames = np.load(path)
        label = args.digit or 0
    else:
        if args.digit is None:
            raise ValueError("either --frames or --digit is required")
        traj = gen_digit_trajectory(args.digit, args.style, args.seed)
        frames = render_pressure(traj)
        label = args.digit
    cfg = FrontEndConfig(noise_sigma=args.noise_sigma)
    stream = acquire_sample(frames, args.delta, cfg=cfg, label=label,
                            noise_seed=args.seed)
    Path(args.out).write_bytes(write_aer(stream))
    stats = compression_stats(stream)
    payload = {"schema": "eskin.encode/1", "out": str(args.out),
               "delta": args.delta, **stats.to_dict()}
    _emit(args, payload, [
        f"wrote {stream.event_count} events to {args.out}",
        f"sparsity {stats.sparsity:.4f}, compression {stats.compression_ratio:.1f}x",
    ])
    return 0


def cmd_train(args):
    from .dataset import load_dataset
    from .network import conv_snn_spec, snn_fc_spec
    from .quantize import quantize_weights, save_checkpoint
    from .training import CnnHyper, SpikingHyper, train_cnn, train_spiking

    ds = load_dataset(args.manifest)
    if args.network == "cnn":
        hyper = CnnHyper(seed=args.seed)
        if args.epochs:
            hyper.epochs = args.epochs
        result = train_cnn(ds.maps, ds.labels, ds.train_idx, ds.test_idx,
                           hyper=hyper, verbose=not args.json)
        quantized = None
    else:
        spec = conv_snn_spec() if args.network == "conv_snn" else snn_fc_spec()
        hyper = SpikingHyper(seed=args.seed)
        if args.epochs:
            hyper.epochs = args.epochs
        result = train_spiking(ds.spikes, ds.labels, ds.train_idx, ds.test_idx,
                               spec=spec, hyper=hyper, verbose=not args.json)
        quantized = quantize_weights(result.weights, bits=args.bits)
    final = result.curves[-1]
    save_checkpoint(args.out, args.network, result.weights, quantized,
                    meta={"curves": result.curves, "seed": args.seed,
                          "manifest": str(args.manifest)})
    payload = {"schema": "eskin.train/1", "checkpoint": str(args.out),
               "network": args.network, "final": final}
    _emit(args, payload, [
        f"{args.network}: train={final['train_acc']:.4f} test={final['test_acc']:.4f}",
        f"checkpoint at {args.out}",
    ])
    return 0


def evaluate_checkpoint(manifest, checkpoint):
    """Accuracy of a checkpoint on its dataset's test split.

    Uses the same forward code paths as training, so the float accuracy
    reproduces the training log exactly; quantized accuracy is reported
    when codes are stored.
    """
    from .dataset import load_dataset
    from .network import LIFParams, conv_snn_spec, snn_fc_spec
    from .quantize import load_checkpoint
    from .training import _spiking_scores_batched, cnn_forward_train

    ds = load_dataset(manifest)
    kind, weights, quantized, meta = load_checkpoint(checkpoint)
    labels0 = ds.labels - 1
    idx = ds.test_idx
    result = {"schema": "eskin.eval/1", "network": kind, "n_test": len(idx)}
    if kind == "cnn":
        data = ds.maps.reshape(-1, 16, 16, 1).astype(np.float32)
        logits, _ = cnn_forward_train(data[idx], weights)
        result["accuracy"] = float(np.mean(np.argmax(logits, axis=1) == labels0[idx]))
    else:
        spec = conv_snn_spec() if kind == "conv_snn" else snn_fc_spec()
        shape = ds.spikes if kind == "conv_snn" else ds.spikes.reshape(
            len(ds.spikes), ds.spikes.shape[1], -1)
        counts = _spiking_scores_batched(shape[idx], spec, weights, LIFParams())
        result["accuracy"] = float(np.mean(np.argmax(counts, axis=1) == labels0[idx]))
        if quantized is not None:
            counts_q = _spiking_scores_batched(
                shape[idx], spec, quantized.dequantize(), LIFParams())
            result["accuracy_quantized"] = float(
                np.mean(np.argmax(counts_q, axis=1) == labels0[idx]))
            result["bits"] = quantized.bits
    return result


def cmd_eval(args):
    result = evaluate_checkpoint(args.manifest, args.checkpoint)
    lines = [f"{result['network']}: test accuracy {result['accuracy']:.4f}"]
    if "accuracy_quantized" in result:
        lines.append(f"{result['bits']}-bit quantized: {result['accuracy_quantized']:.4f}")
    _emit(args, result, lines)
    return 0


def cmd_bench(args):
    from . import bench

    report = bench.BenchReport(config={"kind": args.kind, "seed": args.seed})
    if args.kind == "scan":
        report.scan_curves = bench.scan_benchmark()
    elif args.kind == "kernels":
        report.kernels = bench.kernel_benchmark(seed=args.seed)
    elif args.kind == "codec":
        from .dataset import load_dataset

        ds = load_dataset(args.manifest)
        report.codec_stats = bench.codec_report(ds.streams)
    elif args.kind == "delta":
        report.delta_sweep = bench.delta_sweep(
            seed=args.seed, verbose=not args.json, threads=args.threads)
        report.config.update({"deltas": list(bench.DEFAULT_SWEEP_DELTAS),
                              "noise_sigma": bench.DEFAULT_SWEEP_NOISE})
    elif args.kind == "table1":
        from .dataset import load_dataset
        from .quantize import load_checkpoint

        ds = load_dataset(args.manifest)
        ckpts = {}
        for name, path in (("cnn", args.cnn), ("snn", args.snn),
                           ("conv_snn", args.conv_snn)):
            if path is None:
                raise ValueError(f"table1 needs --{name.replace('_', '-')} checkpoint")
            kind, weights, _, _ = load_checkpoint(path)
            if kind != name:
                raise ValueError(f"checkpoint {path} is a {kind} model, expected {name}")
            ckpts[name] = weights
        report.table1 = bench.table1_report(ds, ckpts["cnn"], ckpts["snn"],
                                            ckpts["conv_snn"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / f"{args.kind}.json"
    report.write_json(json_path)
    csv_paths = report.write_csv(out)
    payload = {"schema": "eskin.bench/1", "kind": args.kind,
               "json": str(json_path), "csv": [str(p) for p in csv_paths]}
    _emit(args, payload, [f"wrote {json_path}"] + [f"wrote {p}" for p in csv_paths])
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    app = create_app(checkpoint=args.checkpoint, lockstep=args.lockstep)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="eskin",
        description="Event-driven tactile array pipeline: generate, encode, "
                    "train, evaluate, benchmark, serve.")
    parser.add_argument("--json", action="store_true",
                        help="print a machine-readable JSON summary on stdout")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for parallelizable commands")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic digit dataset")
    p.add_argument("--per-class", type=int, default=85, dest="per_class")
    p.add_argument("--styles", type=int, default=13)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--delta", type=int, default=6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("encode", help="acquire and delta-encode one sample")
    p.add_argument("--frames", help=".npy file of (T, 16, 16) pressure frames in kPa")
    p.add_argument("--digit", type=int, choices=range(1, 10),
                   help="synthesize this digit instead of reading --frames")
    p.add_argument("--style", type=int, default=0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--delta", type=int, default=6)
    p.add_argument("--noise-sigma", type=float, default=0.0, dest="noise_sigma")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", help="train a network on a generated dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--network", required=True, choices=("conv_snn", "snn", "cnn"))
    p.add_argument("--epochs", type=int, default=0, help="0 = network default")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--bits", type=int, default=5,
                   help="quantization bit width stored in spiking checkpoints")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="benchmark reports (CSV + JSON)")
    p.add_argument("kind", choices=("scan", "codec", "table1", "delta", "kernels"))
    p.add_argument("--manifest", help="dataset manifest (codec, table1)")
    p.add_argument("--cnn", help="cnn checkpoint (table1)")
    p.add_argument("--snn", help="snn checkpoint (table1)")
    p.add_argument("--conv-snn", dest="conv_snn", help="conv_snn checkpoint (table1)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the live telemetry service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8030)
    p.add_argument("--checkpoint", help="conv_snn checkpoint for live scoring")
    p.add_argument("--lockstep", action="store_true",
                   help="advance frames only on client ticks (deterministic)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
