"""Forward-pass timing of the full and factorized convolutions, plus the memory formulas."""
import csv
import statistics
import time
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .decomp import tucker_ranks
from .graph import SpatialGraph, build_temporal_adjacency
from .stconv import ConvLayerParams, st_conv_factorized, st_conv_full
from .tensor import tucker_reconstruct

INPUT_KINDS = ("lowrank", "iid")


def memory_footprint(n_nodes, d_feat, t_steps, n, d, t):
    """Entries stored by the dense tensor and by its Tucker form: ``(NDT, nN + tT + dD + ndt)``."""
    dims = (n_nodes, d_feat, t_steps, n, d, t)
    if any(int(v) != v or v < 1 for v in dims):
        raise ValueError(f"all sizes must be positive integers, got {dims}")
    n_nodes, d_feat, t_steps, n, d, t = (int(v) for v in dims)
    return n_nodes * d_feat * t_steps, n * n_nodes + t * t_steps + d * d_feat + n * d * t


@dataclass
class BenchRow:
    n_nodes: int
    d_feat: int
    t_steps: int
    ranks: tuple
    wall_time_full: float
    wall_time_factorized: float
    speedup: float
    memory_full: int
    memory_factorized: int
    hooi_iters: int


@dataclass
class BenchReport:
    p: int
    ranks_rule: str
    inputs: str
    rows: list = field(default_factory=list)

    FIELDS = ("N", "D", "T", "n", "d", "t", "wall_time_full", "wall_time_factorized",
              "speedup", "memory_full", "memory_factorized", "hooi_iters")

    def records(self):
        out = []
        for r in self.rows:
            out.append({
                "N": r.n_nodes, "D": r.d_feat, "T": r.t_steps,
                "n": r.ranks[0], "d": r.ranks[1], "t": r.ranks[2],
                "wall_time_full": r.wall_time_full,
                "wall_time_factorized": r.wall_time_factorized,
                "speedup": r.speedup,
                "memory_full": r.memory_full,
                "memory_factorized": r.memory_factorized,
                "hooi_iters": r.hooi_iters,
            })
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.FIELDS)
            writer.writeheader()
            writer.writerows(self.records())

    def to_table(self):
        head = f"{'N':>6} {'D':>4} {'T':>4} {'ranks':>14} {'full s':>10} {'fact s':>10} {'speedup':>8} {'mem full':>10} {'mem fact':>10}"
        lines = [f"p={self.p} ranks={self.ranks_rule} inputs={self.inputs}", head]
        for r in self.rows:
            lines.append(
                f"{r.n_nodes:>6} {r.d_feat:>4} {r.t_steps:>4} {str(tuple(r.ranks)):>14} "
                f"{r.wall_time_full:>10.4f} {r.wall_time_factorized:>10.4f} {r.speedup:>8.2f} "
                f"{r.memory_full:>10} {r.memory_factorized:>10}"
            )
        return "\n".join(lines)


def random_graph(n_nodes, rng, density=0.02):
    a = (rng.random((n_nodes, n_nodes)) < density).astype(np.float64)
    a = np.triu(a, 1)
    return a + a.T


def bench_input(dims, ranks, rng, kind="lowrank", noise=0.1):
    """Unit-norm test input.

    ``lowrank`` is an exact rank-``ranks`` Tucker tensor plus Gaussian noise
    of relative size ``noise``, the regime feature tensors of a trained
    network sit in; ``iid`` is pure Gaussian noise, the worst case for HOOI.
    """
    if kind == "iid":
        x = rng.standard_normal(dims)
        return x / np.linalg.norm(x)
    if kind != "lowrank":
        raise ValueError(f"unknown input kind {kind!r}; choose from {INPUT_KINDS}")
    factors = [np.linalg.qr(rng.standard_normal((size, r)))[0] for size, r in zip(dims, ranks)]
    signal = tucker_reconstruct(rng.standard_normal(ranks), *factors)
    signal /= np.linalg.norm(signal)
    eps = rng.standard_normal(dims)
    return signal + noise * eps / np.linalg.norm(eps)


def _median_time(fn, reps):
    times = []
    result = None
    for _ in range(reps):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), result


def bench_forward(sizes, p=2, ranks_rule="sqrt", reps=5, seed=0, inputs="lowrank",
                  parallel=False, single_thread=True, d_out=None):
    """Median wall time of one full and one factorized forward (HOOI included) per size.

    BLAS is pinned to one thread unless ``single_thread`` is off; ``parallel``
    computes the three factorized components on worker threads.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    report = BenchReport(p, str(ranks_rule), inputs)
    limiter = threadpool_limits(limits=1) if single_thread else nullcontext()
    with limiter:
        for n_nodes, d_feat, t_steps in sizes:
            rng = np.random.default_rng([seed, n_nodes, d_feat, t_steps])
            dims = (n_nodes, d_feat, t_steps)
            ranks = tucker_ranks(dims, ranks_rule)
            sg = SpatialGraph.build(random_graph(n_nodes, rng), p)
            at = build_temporal_adjacency(n_nodes, t_steps, p=p)
            x = bench_input(dims, ranks, rng, inputs)
            width = d_out or d_feat
            params = ConvLayerParams(rng.standard_normal((p + 1, p + 1, width, d_feat)) / np.sqrt(d_feat))
            st_conv_full(x, sg, at, params)  # warm-up
            t_full, _ = _median_time(lambda: st_conv_full(x, sg, at, params), reps)
            t_fact, (_, factors) = _median_time(
                lambda: st_conv_factorized(x, sg, at, params, ranks, parallel=parallel), reps)
            mem = memory_footprint(n_nodes, d_feat, t_steps, *ranks)
            report.rows.append(BenchRow(n_nodes, d_feat, t_steps, tuple(ranks), t_full, t_fact,
                                        t_full / t_fact, mem[0], mem[1], len(factors.errors)))
    return report


def bench_kernels(sizes=(8, 24, 64), reps=5, seed=0):
    """Compiled vs pure-Python kernel timings as a list of dict rows."""
    from . import kernels

    backends = kernels.available_backends()
    rng = np.random.default_rng(seed)
    rows = []
    for size in sizes:
        m = rng.standard_normal((size, size))
        sym = m + m.T
        a = rng.standard_normal((size * 8, size, 12))
        b = rng.standard_normal((size * 8, 12, 12))
        a_f, b_f = np.asfortranarray(a), np.asfortranarray(b)
        cases = {"jacobi_eigh": (lambda mod: mod.jacobi_eigh(sym)),
                 "batch_matmul_c": (lambda mod: mod.batch_matmul(a, b)),
                 "batch_matmul_f": (lambda mod: mod.batch_matmul(a_f, b_f))}
        for kernel, call in cases.items():
            row = {"kernel": kernel, "size": size}
            for name, mod in backends.items():
                row[name], _ = _median_time(lambda: call(mod), reps)
            rows.append(row)
    return rows
