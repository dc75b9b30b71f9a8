"""Command-line entry point ``noisewarp``.

Exit codes: 0 success, 1 bad arguments or malformed files, 2 an internal
invariant failed.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .core import FormatError, InvariantError, make_prior_noise
from .io import export_pgm, read_flo, read_tensor, write_tensor

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _shape(text: str) -> tuple:
    try:
        shape = tuple(int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"shape must look like 64x64, got {text!r}") from None
    if len(shape) not in (2, 3) or min(shape) <= 0:
        raise argparse.ArgumentTypeError("shape needs 2 or 3 positive extents")
    return shape


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def load_flow(path, negate: bool = False) -> np.ndarray:
    """Read a ``.flo`` file or a tensor file holding one channel per axis."""
    if os.fspath(path).lower().endswith(".flo"):
        flow = read_flo(path)
    else:
        t = read_tensor(path).astype(np.float64)
        if t.shape[0] != t.ndim - 1:
            raise FormatError(f"flow tensor needs {t.ndim - 1} channels, found {t.shape[0]}", 0)
        flow = np.moveaxis(t, 0, -1)
    return -flow if negate else flow


def _save(noise, args) -> None:
    write_tensor(noise, args.out)
    if getattr(args, "pgm", None):
        export_pgm(noise[0], args.pgm)


def cmd_gen(args) -> None:
    _save(make_prior_noise(args.shape, args.channels, args.seed), args)


def cmd_warp(args) -> None:
    from .warp import warp_flow

    noise = read_tensor(args.input).astype(np.float64)
    flow = load_flow(args.flow, args.negate_flow)
    if flow.shape[:-1] != noise.shape[1:]:
        raise ValueError(f"flow grid {flow.shape[:-1]} does not match noise grid {noise.shape[1:]}")
    _save(warp_flow(noise, flow, args.method, args.seed, args.upsample), args)


def cmd_warp3d(args) -> None:
    from .warp import warp_flow

    noise = read_tensor(args.input).astype(np.float64)
    if noise.ndim != 4:
        raise ValueError("warp3d needs a 3D noise tensor")
    flow = load_flow(args.flow, args.negate_flow)
    if flow.shape[:-1] != noise.shape[1:]:
        raise ValueError(f"flow grid {flow.shape[:-1]} does not match noise grid {noise.shape[1:]}")
    write_tensor(warp_flow(noise, flow, "particle", args.seed), args.out)


def cmd_warp_seq(args) -> None:
    from .warp import warp_sequence

    noise = read_tensor(args.input).astype(np.float64)
    names = sorted(f for f in os.listdir(args.flow_dir) if f.lower().endswith((".flo", ".nwt")))
    flows = [load_flow(os.path.join(args.flow_dir, f), args.negate_flow) for f in names]
    frames = warp_sequence(noise, flows, args.method, args.seed)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        for k, fr in enumerate(frames):
            write_tensor(fr, os.path.join(args.out_dir, f"frame_{k:04d}.nwt"))
    if args.out:
        _save(frames[-1], args)
    print(f"warped {len(flows)} frames with {args.method}")


def cmd_stats(args) -> None:
    from .evaluation import ks_test_standard_normal, morans_i

    noise = read_tensor(args.input).astype(np.float64)
    reports = [ks_test_standard_normal(noise)]
    if noise.ndim == 3:
        reports += [morans_i(noise[c]) for c in range(noise.shape[0])]
    if args.csv:
        print("test,statistic,p_value,n")
        for r in reports:
            print(f"{r.name},{r.statistic:.6g},{r.p_value:.6g},{r.n}")
    else:
        for r in reports:
            print(r)


def cmd_converge(args) -> None:
    from .evaluation import convergence_experiment
    from .flows import vortex_flow

    shape = (args.size, args.size)
    prior = make_prior_noise(shape, 1, args.seed)
    flow = load_flow(args.flow) if args.flow else vortex_flow(shape, args.angle)
    res = convergence_experiment(prior, flow, args.levels, args.runs, args.seed)
    print("N,mean_W,max_W")
    for N, mean, mx in res["rows"]:
        print(f"{N},{mean:.4e},{mx:.4e}")
    if res["self"]:
        print(f"self,{res['self'][0]:.4e},{res['self'][1]:.4e}")


def cmd_bench(args) -> None:
    from .bench import run_bench

    print(run_bench(args.size, args.reps, args.method, args.upsample, args.backend, args.seed))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="noisewarp", description="Distribution-preserving warping of Gaussian white noise.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write prior white noise")
    g.add_argument("--shape", type=_shape, required=True, help="e.g. 64x64 or 16x16x16")
    g.add_argument("--channels", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--pgm", help="also write a PGM preview of channel 0")
    g.set_defaults(func=cmd_gen)

    w = sub.add_parser("warp", help="warp noise by one flow")
    w.add_argument("--input", required=True)
    w.add_argument("--flow", required=True, help=".flo file or tensor file with one channel per axis")
    w.add_argument("--method", default="grid",
                   choices=["grid", "particle", "hiwyn", "hiwyn-eulerian", "bilinear", "bicubic", "nearest"])
    w.add_argument("--upsample", type=int, default=8, help="N for the upsampling reference")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--negate-flow", action="store_true", help="flip the flow sign (for backward flows)")
    w.add_argument("--out", required=True)
    w.add_argument("--pgm")
    w.set_defaults(func=cmd_warp)

    s = sub.add_parser("warp-seq", help="warp noise through every flow in a directory, in name order")
    s.add_argument("--input", required=True)
    s.add_argument("--flow-dir", required=True)
    s.add_argument("--method", default="grid", choices=["grid", "particle"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--negate-flow", action="store_true")
    s.add_argument("--out", help="final frame")
    s.add_argument("--out-dir", help="write every frame here")
    s.add_argument("--pgm")
    s.set_defaults(func=cmd_warp_seq)

    t = sub.add_parser("stats", help="K-S and Moran's I report")
    t.add_argument("--input", required=True)
    t.add_argument("--csv", action="store_true")
    t.set_defaults(func=cmd_stats)

    c = sub.add_parser("converge", help="upsampling reference vs bridge warp, W2 per N")
    c.add_argument("--runs", type=int, default=20000)
    c.add_argument("--levels", type=_int_list, default=[2, 4, 8, 16, 64])
    c.add_argument("--size", type=int, default=8)
    c.add_argument("--angle", type=float, default=1.0, help="vortex strength when no --flow is given")
    c.add_argument("--flow")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_converge)

    b = sub.add_parser("bench", help="kernel timing and memory")
    b.add_argument("--size", type=int, default=1024)
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--method", default="grid", choices=["grid", "particle", "hiwyn"])
    b.add_argument("--upsample", type=int, default=8)
    b.add_argument("--backend", choices=["compiled", "python"])
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("warp3d", help="particle warp of 3D noise")
    d.add_argument("--input", required=True)
    d.add_argument("--flow", required=True, help="tensor file with 3 channels")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--negate-flow", action="store_true")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_warp3d)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "warp-seq" and not (args.out or args.out_dir):
            parser.error("warp-seq needs --out or --out-dir")
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.func(args)
    except InvariantError as e:
        print(f"noisewarp: internal error: {e}", file=sys.stderr)
        return 2
    except (FormatError, ValueError, OSError, RuntimeError) as e:
        print(f"noisewarp: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
