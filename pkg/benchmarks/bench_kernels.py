"""Benchmark the compiled distance kernels against the pure-python fallback.

Runs each kernel on identical random inputs under both backends, checks the
results are bit-identical, and reports the timings. The fallback backend is
selected by re-importing the package in a subprocess with
BUILDMESH_PURE_PYTHON=1, mirroring how users would force it.

Usage: python3 benchmarks/bench_kernels.py [--points N] [--repeats R]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

WORKER = """
import json, sys, time
import numpy as np
from buildmesh import kernels

sizes = json.loads(sys.argv[1])
repeats = sizes["repeats"]
rng = np.random.default_rng(0)
query = rng.uniform(-1.0, 1.0, size=(sizes["points"], 3))
target = rng.uniform(-1.0, 1.0, size=(sizes["points"], 3))
tri = rng.uniform(-1.0, 1.0, size=(3, sizes["triangles"], 3))

out = {"backend": kernels.BACKEND, "timings": {}}

start = time.perf_counter()
for _ in range(repeats):
    nearest = kernels.nearest_distances(query, target)
out["timings"]["nearest_distances"] = (time.perf_counter() - start) / repeats

start = time.perf_counter()
for _ in range(repeats):
    tridist = kernels.points_to_triangles(query, tri[0], tri[1], tri[2])
out["timings"]["points_to_triangles"] = (time.perf_counter() - start) / repeats

out["checksums"] = {
    "nearest_distances": nearest.tobytes().hex()[:32],
    "points_to_triangles": tridist.tobytes().hex()[:32],
}
out["sums"] = {
    "nearest_distances": float(nearest.sum()),
    "points_to_triangles": float(tridist.sum()),
}
print(json.dumps(out))
"""


def run_backend(pure_python, sizes):
    env = dict(os.environ)
    if pure_python:
        env["BUILDMESH_PURE_PYTHON"] = "1"
    else:
        env.pop("BUILDMESH_PURE_PYTHON", None)
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, json.dumps(sizes)],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(proc.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=2000)
    parser.add_argument("--triangles", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = {
        "points": args.points,
        "triangles": args.triangles,
        "repeats": args.repeats,
    }

    compiled = run_backend(pure_python=False, sizes=sizes)
    fallback = run_backend(pure_python=True, sizes=sizes)

    if compiled["backend"] == fallback["backend"]:
        print("note: compiled extension not built; comparing fallback to itself")
    if compiled["checksums"] != fallback["checksums"]:
        print("ERROR: backends disagree", file=sys.stderr)
        return 1
    print(f"inputs: {args.points} points, {args.triangles} triangles, "
          f"mean of {args.repeats} repeats")
    print(f"{'kernel':<22}{compiled['backend']:>12}{fallback['backend']:>12}"
          f"{'speedup':>10}")
    for name in compiled["timings"]:
        fast = compiled["timings"][name]
        slow = fallback["timings"][name]
        print(f"{name:<22}{fast * 1e3:>10.2f}ms{slow * 1e3:>10.2f}ms"
              f"{slow / fast:>9.1f}x")
    print("results bit-identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
