"""``sttgcn`` command line: train, eval, bench, decompose, perturb-sweep, rank-sweep, ha, synth.

Reports go to ``--out`` (default ``$STTGCN_OUT`` or ``./sttgcn_out``): a
table on stdout and one CSV per report.
"""
import argparse
import csv
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bench
from .data import (
    add_gaussian_noise,
    ha_baseline,
    load_dataset,
    prepare_windows,
    synthetic_ring_dataset,
    write_csv,
)
from .decomp import DEFAULT_MAX_ITER, DEFAULT_TOL, hooi, tucker_ranks
from .graph import TEMPORAL_SCHEMES, SpatialGraph, build_temporal_adjacency
from .metrics import compute_metrics
from .model import MODES, TrainConfig, evaluate, layer_ranks, load_checkpoint, save_checkpoint, train
from .tensor import DataError

log = logging.getLogger("sttgcn")

SIGMAS = (0.0, 0.2, 0.4, 1.0, 2.0, 4.0)
RANK_EXPONENTS = ("1", "1/2", "1/3")
METRIC_FIELDS = ("rmse", "mae", "accuracy", "r2", "var")


def out_dir(args):
    path = Path(args.out or os.environ.get("STTGCN_OUT") or "sttgcn_out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def parse_ranks(text):
    """``sqrt``/``cbrt``/``full``, an exponent like ``1/2`` or ``0.5``, or explicit ``n,d,t``."""
    if text in ("sqrt", "cbrt", "full"):
        return text
    if "," in text:
        parts = [int(v) for v in text.split(",")]
        if len(parts) != 3 or min(parts) < 1:
            raise argparse.ArgumentTypeError(f"explicit ranks need three positive integers, got {text!r}")
        return tuple(parts)
    try:
        value = float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad rank rule {text!r}") from None
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("rank exponent must lie in (0, 1]")
    return value


def parse_sizes(text):
    sizes = []
    for item in text.split(","):
        dims = [int(v) for v in item.lower().split("x")]
        if len(dims) != 3 or min(dims) < 1:
            raise argparse.ArgumentTypeError(f"size {item!r} is not NxDxT")
        sizes.append(tuple(dims))
    return sizes


def _floats(text):
    return [float(Fraction(v)) for v in text.split(",")]


def _ints(text):
    return [int(v) for v in text.split(",")]


def add_data_args(p):
    g = p.add_argument_group("data")
    g.add_argument("--speed", help="speed CSV: rows are timestamps, columns are nodes")
    g.add_argument("--adj", help="adjacency CSV, N x N")
    g.add_argument("--synthetic", action="store_true",
                   help="use the built-in 20-node ring dataset instead of CSV files")
    g.add_argument("--interval", type=int, default=15, help="minutes between rows (default 15)")
    g.add_argument("--t-in", type=int, default=12, help="input window length in steps")
    g.add_argument("--t-out", type=int, default=1, help="forecast horizon in steps")
    g.add_argument("--split", type=float, default=0.8, help="training fraction (chronological)")
    g.add_argument("--data-seed", type=int, default=0, help="seed of the synthetic dataset")


def add_model_args(p):
    g = p.add_argument_group("model")
    g.add_argument("--mode", choices=MODES, default="factorized")
    g.add_argument("--epochs", type=int, default=500)
    g.add_argument("--lr", type=float, default=0.001)
    g.add_argument("--batch-size", type=int, default=32)
    g.add_argument("--l2", type=float, default=1e-5)
    g.add_argument("--p", type=int, default=2, help="order of spatial and temporal powers")
    g.add_argument("--ranks", type=parse_ranks, default="sqrt",
                   help="sqrt, cbrt, full, an exponent such as 1/2, or n,d,t")
    g.add_argument("--refactorize-every", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--hidden", type=int, default=128, help="width of the first embedding layer")
    g.add_argument("--embed-dim", type=int, default=128)
    g.add_argument("--conv-dims", type=_ints, default=(128, 64), help="two widths, e.g. 128,64")
    g.add_argument("--readout", choices=("sigmoid", "identity"), default="sigmoid")
    g.add_argument("--hooi-max-iter", type=int, default=DEFAULT_MAX_ITER)
    g.add_argument("--hooi-tol", type=float, default=DEFAULT_TOL)
    g.add_argument("--val-fraction", type=float, default=0.1)
    g.add_argument("--temporal", choices=TEMPORAL_SCHEMES, default="backward-chain")


def config_from_args(args, **overrides):
    fields = dict(
        epochs=args.epochs, learning_rate=args.lr, batch_size=args.batch_size, l2=args.l2,
        p=args.p, mode=args.mode, ranks=args.ranks, refactorize_every=args.refactorize_every,
        seed=args.seed, t_in=args.t_in, t_out=args.t_out, embed_hidden=args.hidden,
        embed_dim=args.embed_dim, conv_dims=tuple(args.conv_dims),
        readout_activation=args.readout, hooi_max_iter=args.hooi_max_iter,
        hooi_tol=args.hooi_tol, val_fraction=args.val_fraction,
    )
    fields.update(overrides)
    return TrainConfig(**fields)


def load_raw(args):
    if args.synthetic:
        if args.speed or args.adj:
            raise ValueError("--synthetic cannot be combined with --speed/--adj")
        return synthetic_ring_dataset(seed=args.data_seed, interval_minutes=args.interval)
    if not args.speed or not args.adj:
        raise ValueError("--speed and --adj are required (or pass --synthetic)")
    return load_dataset(args.speed, args.adj, args.interval)


def graphs_for(raw, t_in, p, scheme="backward-chain"):
    sg = SpatialGraph.build(raw.adjacency, p)
    at = build_temporal_adjacency(raw.n_nodes, t_in, scheme, p)
    return sg, at


def write_rows(path, fieldnames, rows, append=False):
    exists = append and path.exists() and path.stat().st_size > 0
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        if not exists:
            writer.writeheader()
        writer.writerows(rows)


def read_rows(path):
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def metric_row(report):
    return {k: ("" if v is None else repr(float(v))) for k, v in report.as_dict().items()}


def _print_report(report, title):
    print(report.to_table(title))
    print(report.to_kv())


def cmd_train(args):
    raw = load_raw(args)
    windows = prepare_windows(raw, args.t_in, args.t_out, args.split)
    config = config_from_args(args)
    sg, at = graphs_for(raw, args.t_in, config.p, args.temporal)
    out = out_dir(args)
    res = train(config, windows, sg, at,
                callback=lambda row: log.info("epoch %d train_loss %.6g", row["epoch"], row["train_loss"]))
    save_checkpoint(out / "checkpoint.npz", res.params, config, windows.scaler,
                    extra={"best_epoch": res.best_epoch, "temporal": args.temporal})
    hist_fields = ["epoch", "train_loss"] + [f"val_{k}" for k in METRIC_FIELDS]
    write_rows(out / "history.csv", hist_fields,
               [{k: row.get(k, "") for k in hist_fields} for row in res.history])
    report, _ = evaluate(res.params, windows, sg, at, config)
    write_rows(out / "metrics.csv", ("split", "mode") + METRIC_FIELDS,
               [{"split": "test", "mode": config.mode, **metric_row(report)}])
    _print_report(report, f"test metrics ({config.mode}, best epoch {res.best_epoch})")
    return 0


def cmd_eval(args):
    params, config, scaler_max, meta = load_checkpoint(args.checkpoint)
    raw = load_raw(args)
    windows = prepare_windows(raw, config.t_in, config.t_out, args.split)
    if scaler_max is not None:
        windows.scaler = type(windows.scaler)(scaler_max)
    sg, at = graphs_for(raw, config.t_in, config.p, meta.get("extra", {}).get("temporal", "backward-chain"))
    report, preds = evaluate(params, windows, sg, at, config, args.eval_split)
    out = out_dir(args)
    write_rows(out / "eval.csv", ("split", "mode") + METRIC_FIELDS,
               [{"split": args.eval_split, "mode": config.mode, **metric_row(report)}])
    if args.predictions:
        flat = preds.reshape(preds.shape[0], -1)
        write_csv(out / "predictions.csv", flat)
    _print_report(report, f"{args.eval_split} metrics ({config.mode})")
    return 0


def cmd_ha(args):
    raw = load_raw(args)
    windows = prepare_windows(raw, args.t_in, args.t_out, args.split)
    report = compute_metrics(windows.scaler.descale(windows.test_targets), ha_baseline(windows))
    write_rows(out_dir(args) / "ha.csv", ("t_in", "t_out") + METRIC_FIELDS,
               [{"t_in": args.t_in, "t_out": args.t_out, **metric_row(report)}])
    _print_report(report, f"HA baseline (t_in={args.t_in}, t_out={args.t_out})")
    return 0


def cmd_bench(args):
    out = out_dir(args)
    report = bench.bench_forward(args.sizes, p=args.p, ranks_rule=args.ranks, reps=args.reps,
                                 seed=args.seed, inputs=args.inputs, parallel=args.parallel,
                                 single_thread=not args.threads)
    report.write_csv(out / "bench.csv")
    print(report.to_table())
    if args.kernels:
        rows = bench.bench_kernels(reps=args.reps, seed=args.seed)
        names = sorted({k for r in rows for k in r} - {"kernel", "size"})
        write_rows(out / "kernels.csv", ["kernel", "size"] + names, rows)
        for r in rows:
            print("  ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()))
    return 0


def cmd_decompose(args):
    if args.tensor:
        x = np.load(args.tensor)
        if x.ndim != 3:
            raise DataError(f"{args.tensor}: expected a 3-way array, got shape {x.shape}")
        source = args.tensor
    else:
        raw = load_raw(args)
        windows = prepare_windows(raw, args.t_in, args.t_out, args.split)
        count = min(args.windows, windows.n_train)
        if count < 1:
            raise DataError("no training windows to decompose")
        # nodes x windows x time: the first `count` training windows side by side
        x = np.transpose(windows.train_inputs[:count, :, 0, :], (1, 0, 2))
        source = "windows"
    ranks = args.ranks if isinstance(args.ranks, tuple) else tucker_ranks(x.shape, args.ranks)
    factors = hooi(x, ranks, max_iter=args.hooi_max_iter, tol=args.hooi_tol)
    out = out_dir(args)
    np.savez(out / "factors.npz", core=factors.core, uS=factors.uS, uF=factors.uF, uT=factors.uT)
    write_rows(out / "decompose.csv", ("iteration", "rel_error"),
               [{"iteration": i + 1, "rel_error": repr(float(e))} for i, e in enumerate(factors.errors)])
    full, fact = bench.memory_footprint(*x.shape, *ranks)
    print(f"source={source} dims={x.shape} ranks={tuple(ranks)} iterations={len(factors.errors)}")
    print(f"rel_error={factors.errors[-1]:.6g} memory_full={full} memory_factorized={fact}")
    return 0


def _sweep(path, key_fields, fieldnames, jobs, run_job):
    """Run each job whose key is not already in ``path``; append its row as soon as it finishes."""
    done = {tuple(row[k] for k in key_fields) for row in read_rows(path)}
    for job in jobs:
        key = tuple(str(job[k]) for k in key_fields)
        if key in done:
            log.info("skipping completed row %s", dict(zip(key_fields, key)))
            continue
        row = {**{k: job[k] for k in key_fields}, **run_job(job)}
        write_rows(path, fieldnames, [row], append=True)
        print(", ".join(f"{k}={row[k]}" for k in fieldnames))
    return read_rows(path)


def cmd_perturb_sweep(args):
    raw = load_raw(args)
    sg, at = graphs_for(raw, args.t_in, args.p, args.temporal)
    jobs = [{"sigma": s, "mode": m, "seed": seed}
            for s in args.sigmas for m in args.modes for seed in args.seeds]

    def run(job):
        noisy = add_gaussian_noise(raw, job["sigma"], seed=args.noise_seed + job["seed"])
        windows = prepare_windows(noisy, args.t_in, args.t_out, args.split)
        config = config_from_args(args, mode=job["mode"], seed=job["seed"])
        res = train(config, windows, sg, at)
        report, _ = evaluate(res.params, windows, sg, at, config)
        return metric_row(report)

    _sweep(out_dir(args) / "perturb_sweep.csv", ("sigma", "mode", "seed"),
           ("sigma", "mode", "seed") + METRIC_FIELDS, jobs, run)
    return 0


def cmd_rank_sweep(args):
    raw = load_raw(args)
    windows = prepare_windows(raw, args.t_in, args.t_out, args.split)
    sg, at = graphs_for(raw, args.t_in, args.p, args.temporal)
    jobs = [{"exponent": e, "seed": seed} for e in args.exponents for seed in args.seeds]

    def run(job):
        config = config_from_args(args, mode="factorized", ranks=float(Fraction(job["exponent"])),
                                  seed=job["seed"])
        ranks = layer_ranks(config, (raw.n_nodes, config.embed_dim, config.t_in))
        res = train(config, windows, sg, at)
        report, _ = evaluate(res.params, windows, sg, at, config)
        return {"n": ranks[0], "d": ranks[1], "t": ranks[2], **metric_row(report)}

    _sweep(out_dir(args) / "rank_sweep.csv", ("exponent", "seed"),
           ("exponent", "seed", "n", "d", "t") + METRIC_FIELDS, jobs, run)
    return 0


def cmd_synth(args):
    raw = synthetic_ring_dataset(n_nodes=args.nodes, steps=args.steps, noise_std=args.noise,
                                 seed=args.data_seed, interval_minutes=args.interval)
    out = out_dir(args)
    write_csv(out / "speed.csv", raw.speeds, header=[f"node{k}" for k in range(raw.n_nodes)])
    write_csv(out / "adj.csv", raw.adjacency)
    print(f"wrote {out / 'speed.csv'} ({raw.n_steps}x{raw.n_nodes}) and {out / 'adj.csv'}")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("--out", help="output directory (default $STTGCN_OUT or ./sttgcn_out)")
    parser = argparse.ArgumentParser(prog="sttgcn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("train", parents=[common], help="train a model, write checkpoint, history and test metrics")
    add_data_args(p)
    add_model_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--eval-split", choices=("test", "train"), default="test")
    p.add_argument("--predictions", action="store_true", help="also write descaled predictions")
    add_data_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ha", parents=[common], help="historical-average baseline metrics")
    add_data_args(p)
    p.set_defaults(func=cmd_ha)

    p = sub.add_parser("bench", parents=[common], help="time full vs factorized forward passes")
    p.add_argument("--sizes", type=parse_sizes, default=parse_sizes("156x128x12,512x64x12,1024x64x12"),
                   help="comma-separated NxDxT list")
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--ranks", choices=("sqrt", "cbrt", "full"), default="sqrt")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inputs", choices=bench.INPUT_KINDS, default="lowrank")
    p.add_argument("--parallel", action="store_true", help="compute the three components concurrently")
    p.add_argument("--threads", action="store_true", help="do not pin BLAS to one thread")
    p.add_argument("--kernels", action="store_true", help="also compare compiled and numpy kernels")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("decompose", parents=[common], help="HOOI of a .npy tensor or of stacked data windows")
    p.add_argument("--tensor", help=".npy file holding a 3-way array")
    p.add_argument("--windows", type=int, default=64, help="training windows to stack (data mode)")
    p.add_argument("--ranks", type=parse_ranks, default="sqrt")
    p.add_argument("--hooi-max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--hooi-tol", type=float, default=DEFAULT_TOL)
    add_data_args(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("perturb-sweep", parents=[common], help="train and test on Gaussian-perturbed speeds")
    add_data_args(p)
    add_model_args(p)
    p.add_argument("--sigmas", type=_floats, default=list(SIGMAS))
    p.add_argument("--modes", type=lambda s: s.split(","), default=["full", "factorized"])
    p.add_argument("--seeds", type=_ints, default=[0])
    p.add_argument("--noise-seed", type=int, default=1000)
    p.set_defaults(func=cmd_perturb_sweep)

    p = sub.add_parser("rank-sweep", parents=[common], help="factorized model at several rank exponents")
    add_data_args(p)
    add_model_args(p)
    p.add_argument("--exponents", type=lambda s: s.split(","), default=list(RANK_EXPONENTS))
    p.add_argument("--seeds", type=_ints, default=[0])
    p.set_defaults(func=cmd_rank_sweep)

    p = sub.add_parser("synth", parents=[common], help="write the synthetic ring dataset as CSV")
    p.add_argument("--nodes", type=int, default=20)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--interval", type=int, default=15)
    p.add_argument("--data-seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def run_cli(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "modes", None):
        bad = [m for m in args.modes if m not in MODES]
        if bad:
            parser.print_usage(sys.stderr)
            print(f"sttgcn: error: unknown mode(s) {bad}", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except (DataError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"sttgcn: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
