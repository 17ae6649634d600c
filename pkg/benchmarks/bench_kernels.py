"""Compiled (Cython) vs numpy-fallback kernel timings, plus the end-to-end HOOI cost under each.

    python benchmarks/bench_kernels.py [--reps 7] [--csv kernels.csv]
"""
import argparse
import csv
import os
import subprocess
import sys

from sttgcn.bench import bench_kernels

HOOI_SNIPPET = """
import time, numpy as np
from sttgcn import kernels
from sttgcn.decomp import hooi
x = np.random.default_rng(0).standard_normal((156, 64, 12))
times = []
for _ in range({reps}):
    t0 = time.perf_counter(); hooi(x, (13, 8, 4), max_iter=10); times.append(time.perf_counter() - t0)
times.sort()
print(kernels.BACKEND, times[len(times) // 2])
"""


def hooi_under(backend, reps):
    env = dict(os.environ)
    if backend == "python":
        env["STTGCN_PURE_PYTHON"] = "1"
    else:
        env.pop("STTGCN_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", HOOI_SNIPPET.format(reps=reps)], env=env,
                         capture_output=True, text=True, check=True).stdout.split()
    return out[0], float(out[1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=7)
    ap.add_argument("--csv")
    args = ap.parse_args()

    rows = bench_kernels(reps=args.reps)
    for backend in ("python", "cython"):
        name, t = hooi_under(backend, max(3, args.reps // 2))
        row = next((r for r in rows if r["kernel"] == "hooi_156x64x12"), None)
        if row is None:
            row = {"kernel": "hooi_156x64x12", "size": 156}
            rows.append(row)
        row[name] = t

    print(f"{'kernel':<16} {'size':>5} {'python s':>12} {'cython s':>12} {'ratio':>8}")
    for r in rows:
        py, cy = r.get("python"), r.get("cython")
        ratio = f"{py / cy:8.1f}" if py and cy else "       -"
        print(f"{r['kernel']:<16} {r['size']:>5} {py or float('nan'):>12.3g} {cy or float('nan'):>12.3g} {ratio}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["kernel", "size", "python", "cython"])
            writer.writeheader()
            writer.writerows(rows)


if __name__ == "__main__":
    main()
