"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/compare_backends.py --size 64 --reps 3

The python backend loops over polygons in the interpreter, so keep --size
small. Each row reports the median over --reps calls and the speedup.
"""
import argparse
import statistics
import time

from noisewarp import _backend
from noisewarp.bench import kernel_call
from noisewarp.core import make_prior_noise
from noisewarp.flows import vortex_flow
from noisewarp.hiwyn import hiwyn_warp_eulerian


def median_ms(fn, reps):
    fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--upsample", type=int, default=4)
    args = ap.parse_args()
    if not _backend.COMPILED_AVAILABLE:
        raise SystemExit("compiled backend is not built; run pip install -e . first")

    shape = (args.size, args.size)
    prior = make_prior_noise(shape, 1, 0)
    flow = vortex_flow(shape, angle=0.8)
    cases = {
        "grid": kernel_call("grid"),
        "particle": kernel_call("particle"),
        "hiwyn": kernel_call("hiwyn", args.upsample),
        "hiwyn-eulerian": lambda p, f, s: hiwyn_warp_eulerian(p, f, args.upsample, s),
    }
    print(f"size {args.size}x{args.size}, reps {args.reps}, hiwyn N={args.upsample}")
    print(f"{'method':<16}{'compiled ms':>14}{'python ms':>14}{'speedup':>10}")
    for name, fn in cases.items():
        row = {}
        for b in ("compiled", "python"):
            with _backend.use(b):
                row[b] = median_ms(lambda: fn(prior, flow, 0), args.reps)
        print(f"{name:<16}{row['compiled']:>14.2f}{row['python']:>14.2f}{row['python'] / row['compiled']:>9.1f}x")


if __name__ == "__main__":
    main()
