"""Command-line front end.

Subcommands map 1:1 to the library harnesses: model-preset, explain, csc,
sanity, random-logit, chain-simulate, chain-align, patterns-fit.  All outputs
are written atomically (temp file + rename) with a machine-readable run
manifest beside every primary output; a fixed --seed makes every subcommand
byte-reproducible.  Exit codes: 0 success, 2 configuration, 3 IO/format,
4 numerical failure.
"""

import argparse
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, backend, chainlab, rng
from .attribution import Logit, attribute, fit_patterns, normalize_for_display, parse_rule, render_pgm, saliency_from_trace
from .errors import BundleError, ConfigurationError, ContractViolationError, NumericalFailureError
from .fgrid import read_image, write_fgrid
from .metrics import csc_run, format_csc_report, format_sanity_report, pool_paths, random_logit_other, random_logit_run, sanity_check_run
from .model import forward, load_bundle, preset, save_bundle

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def _atomic_write_bytes(path, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("ascii"))


def _run_manifest(path, args, outputs, started):
    manifest = {
        "command": args.command,
        "argv": [a for a in (args._argv or [])],
        "seed": getattr(args, "seed", None),
        "versions": {"relprop": __version__, "numpy": np.__version__, "backend": backend.BACKEND},
        "wall_time_s": time.monotonic() - started,
        "outputs": [os.path.basename(p) for p in outputs],
    }
    _atomic_write_text(path, json.dumps(manifest, indent=1) + "\n")


def _load_inputs(args, net):
    """Input tensors from --input files and/or --random-inputs draws."""
    inputs = []
    for path in args.input or []:
        arr = read_image(path)
        if arr.shape != net.input_shape:
            raise ContractViolationError(f"{path}: shape {arr.shape} != model input {net.input_shape}")
        inputs.append(arr)
    count = getattr(args, "random_inputs", 0) or 0
    lo, hi = net.input_range
    for i in range(count):
        g = rng.stream(args.seed, rng.DATA, i, 0)
        inputs.append(lo + (hi - lo) * g.random(net.input_shape))
    if not inputs:
        raise ConfigurationError("no inputs: pass --input and/or --random-inputs")
    return inputs


def _parse_sizes(text):
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError:
        raise ConfigurationError(f"sizes must be comma-separated integers, got {text!r}") from None


def _cmd_model_preset(args):
    started = time.monotonic()
    net = preset(args.arch, args.seed, sizes=_parse_sizes(args.sizes) if args.sizes else None)
    if os.path.exists(args.out) and not args.force:
        raise ConfigurationError(f"{args.out} exists (use --force to overwrite)")
    save_bundle(net, args.out)
    _run_manifest(os.path.join(args.out, "run.json"), args, [args.out], started)
    return EXIT_OK


def _cmd_explain(args):
    started = time.monotonic()
    net = load_bundle(args.model)
    rule = parse_rule(args.rule)
    x = _load_inputs(args, net)[0]
    target = args.target if args.target is not None else int(np.argmax(forward(net, x).logits))
    trace = attribute(net, x, rule, Logit(target))
    smap = normalize_for_display(saliency_from_trace(trace))
    outputs = [args.out]
    buf = _fgrid_bytes(smap.grid)
    _atomic_write_bytes(args.out, buf)
    if args.pgm:
        render_pgm(args.pgm, smap)
        outputs.append(args.pgm)
    _run_manifest(args.out + ".run.json", args, outputs, started)
    return EXIT_OK


def _fgrid_bytes(arr) -> bytes:
    import io

    arr = np.asarray(arr, dtype=np.float64)
    header = b"FGRID 1\n" + (" ".join(str(d) for d in arr.shape) + "\n").encode("ascii")
    buf = io.BytesIO()
    buf.write(header)
    buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def _cmd_csc(args):
    started = time.monotonic()
    net = load_bundle(args.model)
    rule = parse_rule(args.rule)
    inputs = _load_inputs(args, net)
    paths = [
        csc_run(
            net,
            x,
            rule,
            inject_layer=args.layer,
            n_vectors=args.vectors,
            seed=args.seed,
            sample_index=i,
            threads=args.threads,
        )
        for i, x in enumerate(inputs)
    ]
    report = format_csc_report(pool_paths(paths))
    _atomic_write_text(args.out, report)
    _run_manifest(args.out + ".run.json", args, [args.out], started)
    return EXIT_OK


def _cmd_sanity(args):
    started = time.monotonic()
    net = load_bundle(args.model)
    rule = parse_rule(args.rule)
    x = _load_inputs(args, net)[0]
    report = sanity_check_run(net, x, rule, args.seed, target=args.target)
    _atomic_write_text(args.out, format_sanity_report(report))
    _run_manifest(args.out + ".run.json", args, [args.out], started)
    return EXIT_OK


def _cmd_random_logit(args):
    started = time.monotonic()
    net = load_bundle(args.model)
    rule = parse_rule(args.rule)
    inputs = _load_inputs(args, net)
    lines = ["input,true_logit,random_logit,ssim"]
    for i, x in enumerate(inputs):
        value = random_logit_run(net, x, rule, args.true_k, args.seed)
        lines.append(f"{i},{args.true_k},{random_logit_other(net, args.true_k, args.seed)},{value!r}")
    _atomic_write_text(args.out, "\n".join(lines) + "\n")
    _run_manifest(args.out + ".run.json", args, [args.out], started)
    return EXIT_OK


def _cmd_chain_simulate(args):
    started = time.monotonic()
    kwargs = dict(family=args.family, steps=args.steps, seed=args.seed, alpha=args.alpha, beta=args.beta)
    if args.family == "from_model":
        if not args.model:
            raise ConfigurationError("from_model chains need --model")
        net = load_bundle(args.model)
        mats = chainlab.model_backward_matrices(net)[: args.steps] or None
        if not mats:
            raise ConfigurationError("model has no linear layers")
        kwargs.update(matrices=tuple(mats), steps=len(mats))
    elif args.dims:
        kwargs.update(dims=tuple(_parse_sizes(args.dims)), divisor=args.divisor)
    else:
        kwargs.update(dim=args.dim)
    report = chainlab.simulate_chain(chainlab.ChainSpec(**kwargs))
    _atomic_write_text(args.out, chainlab.format_chain_report(report))
    _run_manifest(args.out + ".run.json", args, [args.out], started)
    return EXIT_OK


def _cmd_chain_align(args):
    started = time.monotonic()
    net = load_bundle(args.model)
    mats = chainlab.model_backward_matrices(net)
    ratios = chainlab.interlayer_alignment(mats)
    _atomic_write_text(args.out, chainlab.format_alignment_report(ratios))
    _run_manifest(args.out + ".run.json", args, [args.out], started)
    return EXIT_OK


def _cmd_patterns_fit(args):
    started = time.monotonic()
    net = load_bundle(args.model)
    if args.data:
        stacked = read_image(args.data)
        if stacked.shape[1:] != net.input_shape:
            raise ContractViolationError(
                f"{args.data}: per-sample shape {stacked.shape[1:]} != model input {net.input_shape}"
            )
        data = list(stacked)
    else:
        lo, hi = net.input_range
        data = [
            lo + (hi - lo) * rng.stream(args.seed, rng.DATA, i, 0).random(net.input_shape)
            for i in range(args.random_samples)
        ]
    net.patterns = fit_patterns(net, data)
    if os.path.exists(args.out) and not args.force:
        raise ConfigurationError(f"{args.out} exists (use --force to overwrite)")
    save_bundle(net, args.out)
    _run_manifest(os.path.join(args.out, "run.json"), args, [args.out], started)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relprop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model-preset", help="write a seeded preset model bundle")
    p.add_argument("arch", choices=["cifar10", "mlp", "tiny_residual"])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--sizes", help="mlp layer sizes, e.g. 4,3,2")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_model_preset)

    p = sub.add_parser("explain", help="saliency map for one input")
    p.add_argument("--model", required=True)
    p.add_argument("--input", action="append")
    p.add_argument("--random-inputs", type=int, default=0)
    p.add_argument("--rule", required=True)
    p.add_argument("--target", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm")
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("csc", help="cosine similarity convergence report")
    p.add_argument("--model", required=True)
    p.add_argument("--input", action="append")
    p.add_argument("--random-inputs", type=int, default=0)
    p.add_argument("--rule", required=True)
    p.add_argument("--layer", help="injection layer (default: final layer)")
    p.add_argument("--vectors", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_csc)

    p = sub.add_parser("sanity", help="cascading parameter-randomization check")
    p.add_argument("--model", required=True)
    p.add_argument("--input", action="append")
    p.add_argument("--random-inputs", type=int, default=0)
    p.add_argument("--rule", required=True)
    p.add_argument("--target", type=int)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sanity)

    p = sub.add_parser("random-logit", help="true-vs-random logit SSIM")
    p.add_argument("--model", required=True)
    p.add_argument("--input", action="append")
    p.add_argument("--random-inputs", type=int, default=0)
    p.add_argument("--rule", required=True)
    p.add_argument("--true-k", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_random_logit)

    p = sub.add_parser("chain-simulate", help="matrix-chain convergence simulation")
    p.add_argument("--family", choices=list(chainlab.FAMILIES), required=True)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--dims", help="explicit dimension schedule, e.g. 10,512,256")
    p.add_argument("--divisor", type=int, default=1)
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--model", help="bundle for from_model chains")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_chain_simulate)

    p = sub.add_parser("chain-align", help="inter-layer singular-value alignment")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_chain_align)

    p = sub.add_parser("patterns-fit", help="fit signal patterns and store them in a bundle")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="FGRID stack of fitting inputs (first axis = samples)")
    p.add_argument("--random-samples", type=int, default=0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_patterns_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    args._argv = argv
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"relprop: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BundleError, ContractViolationError, OSError) as exc:
        print(f"relprop: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalFailureError as exc:
        print(f"relprop: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
