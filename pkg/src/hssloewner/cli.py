"""Command-line front end: ``generate | fit | eval | bench``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
Reports are CSV files whose first line is a ``# <schema> v1`` comment.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .data import DatasetError, generate_synthetic, load_dataset, sample_system, save_dataset, save_system
from .dense import DENSE_LIMIT, DenseLimitError
from .model import IllConditionedError, ModelFileError, freqresp, h2_error, load_model, save_model
from .partition import PartitionError, PartitionKind
from .pipeline import METHODS, ConvergenceError, fit

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

FIT_SCHEMA = "# hssloewner-fit-report v1"
EVAL_SCHEMA = "# hssloewner-eval v1"
BENCH_SCHEMA = "# hssloewner-bench v1"

FIT_FIELDS = [
    "method", "partition", "N", "M", "p", "q", "n", "order_auto", "x", "hss_rank",
    "construction_s", "reduction_s", "storage_entries", "matvecs", "restarts", "converged", "h2_error",
]
BENCH_FIELDS = [
    "N", "method", "status", "construction_s", "reduction_s", "total_s", "hss_rank",
    "storage_entries", "h2_error",
]


class CliError(Exception):
    def __init__(self, msg, code=EXIT_INVALID):
        super().__init__(msg)
        self.code = code


def _threads(n):
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _write_csv(path, schema, fields, rows):
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        fh.write(schema + "\n")
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in fields})
    finally:
        if fh is not sys.stdout:
            fh.close()


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".17g")
    return v


def _order(value):
    if value.strip().lower() == "auto":
        return "auto"
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"order must be a positive integer or 'auto', got {value!r}")
    if n < 1:
        raise argparse.ArgumentTypeError(f"order must be positive, got {n}")
    return n


def _shift(value):
    if value.strip().lower() == "first":
        return "first"
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"shift must be a real number or 'first', got {value!r}")


def _partition(value):
    try:
        return PartitionKind.parse(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def cmd_generate(args) -> int:
    if args.n < 2 or args.n % 2:
        raise CliError(f"--n must be a positive even order (conjugate pole pairs), got {args.n}")
    if args.N < 2:
        raise CliError(f"--N must be at least 2, got {args.N}")
    if not 0 < args.fmin < args.fmax:
        raise CliError(f"need 0 < --fmin < --fmax, got {args.fmin}, {args.fmax}")
    sys_ = generate_synthetic(args.n, args.p, seed=args.seed, q=args.q)
    d = sample_system(sys_, args.N, args.fmin, args.fmax, snr_db=args.snr, seed=args.seed)
    save_dataset(d, args.out)
    sidecar = args.system_out or str(args.out) + ".system.json"
    save_system(sys_, sidecar)
    print(f"wrote {args.out} (N={d.N}, p={d.p}, q={d.q}) and {sidecar}")
    return EXIT_OK


def cmd_fit(args) -> int:
    d = load_dataset(args.data)
    res = fit(
        d,
        method=args.method,
        partition_kind=args.partition,
        order=args.order,
        x=args.x,
        tol=args.tol,
        leaf=args.leaf,
        seed=args.seed,
        conv_tol=args.conv_tol,
        max_restarts=args.max_restarts,
        dense_limit=args.dense_limit,
    )
    if args.model_out:
        save_model(res.model, args.model_out)
    _write_csv(args.report, FIT_SCHEMA, FIT_FIELDS, [res.report])
    if "h2_note" in res.report:
        print(f"warning: {res.report['h2_note']}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    m = load_model(args.model)
    d = load_dataset(args.data)
    if (m.p, m.q) != (d.p, d.q):
        raise CliError(f"model is {m.p}x{m.q} but data is {d.p}x{d.q}")
    Hm = freqresp(m, 1j * d.omega)
    nd = np.linalg.norm(d.H, axis=(1, 2))
    nm = np.linalg.norm(Hm, axis=(1, 2))
    ne = np.linalg.norm(d.H - Hm, axis=(1, 2))
    h2 = h2_error(m, d)
    fields = ["freq_hz", "data_fro", "model_fro", "error_fro"]
    rows = [dict(zip(fields, map(float, r))) for r in zip(d.freqs, nd, nm, ne)]
    _write_csv(args.out, EVAL_SCHEMA + f" h2_error={h2:.17g}", fields, rows)
    print(f"h2_error={h2:.17g}", file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_bench(args) -> int:
    for N in args.grid:
        if N < 4:
            raise CliError(f"grid sizes must be at least 4, got {N}")
    sys_ = generate_synthetic(args.system_order, args.p, seed=args.seed)
    rows = []
    for N in args.grid:
        d = sample_system(sys_, N, args.fmin, args.fmax, snr_db=args.snr, seed=args.seed)
        for method in args.methods:
            row = {"N": N, "method": method}
            if method.startswith("dense") and N > args.dense_limit:
                row["status"] = "skipped"
                rows.append(row)
                continue
            best = None
            for _ in range(args.repeats):
                r = fit(
                    d, method=method, partition_kind=args.partition, order=args.order,
                    tol=args.tol, leaf=args.leaf, seed=args.seed, dense_limit=args.dense_limit,
                    score=False,
                )
                total = r.report["construction_s"] + r.report["reduction_s"]
                if best is None or total < best[0]:
                    best = (total, r)
            total, r = best
            row.update(
                status="ok",
                construction_s=r.report["construction_s"],
                reduction_s=r.report["reduction_s"],
                total_s=total,
                hss_rank=r.report["hss_rank"],
                storage_entries=r.report["storage_entries"],
            )
            try:
                row["h2_error"] = h2_error(r.model, d)
            except IllConditionedError:
                row["h2_error"] = float("nan")
            rows.append(row)
            print(f"N={N} {method}: {total:.3f} s", file=sys.stderr)
    _write_csv(args.out, BENCH_SCHEMA, BENCH_FIELDS, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hssloewner", description="Loewner-framework model reduction with HSS-compressed Cauchy kernels."
    )
    ap.add_argument("--threads", type=int, default=0, help="cap BLAS/LAPACK worker threads (0 = library default)")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a random synthetic system to CSV")
    g.add_argument("--n", type=int, required=True, help="system order (even)")
    g.add_argument("--p", type=int, default=1, help="outputs")
    g.add_argument("--q", type=int, default=None, help="inputs (default: p)")
    g.add_argument("--N", type=int, required=True, help="number of frequency samples")
    g.add_argument("--fmin", type=float, default=1591.5)
    g.add_argument("--fmax", type=float, default=1591549.0)
    g.add_argument("--snr", type=float, default=None, help="signal-to-noise ratio in dB (default: noiseless)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--system-out", default=None, help="true-system sidecar (default: <out>.system.json)")
    g.set_defaults(func=cmd_generate)

    def common(p):
        p.add_argument("--partition", type=_partition, default=PartitionKind.ODD_EVEN_REAL,
                       help="half-half | odd-even | odd-even-real")
        p.add_argument("--order", type=_order, default=50, help="reduced order or 'auto'")
        p.add_argument("--tol", type=float, default=1e-14, help="HSS compression tolerance")
        p.add_argument("--leaf", type=int, default=64, help="HSS leaf size")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--dense-limit", type=int, default=DENSE_LIMIT)

    f = sub.add_parser("fit", help="fit a reduced model to a dataset")
    f.add_argument("--data", required=True)
    f.add_argument("--method", choices=METHODS, default="hss")
    common(f)
    f.add_argument("--x", type=_shift, default="first", help="real shift, or 'first' (lowest frequency)")
    f.add_argument("--conv-tol", type=float, default=1e-8)
    f.add_argument("--max-restarts", type=int, default=200)
    f.add_argument("--model-out", default=None)
    f.add_argument("--report", default="-", help="report CSV path ('-' = stdout)")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="per-frequency errors of a model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", default="-", help="CSV path ('-' = stdout)")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="timing sweep over sample counts")
    b.add_argument("--grid", type=int, nargs="+", default=[8192, 16384, 32768])
    b.add_argument("--methods", nargs="+", choices=METHODS, default=["hss"])
    b.add_argument("--p", type=int, default=1)
    b.add_argument("--system-order", type=int, default=50)
    b.add_argument("--snr", type=float, default=100.0)
    b.add_argument("--fmin", type=float, default=1591.5)
    b.add_argument("--fmax", type=float, default=1591549.0)
    b.add_argument("--repeats", type=int, default=1, help="report the fastest of this many runs")
    b.add_argument("--out", default="-")
    common(b)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        with _threads(args.threads):
            return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (DatasetError, ModelFileError, PartitionError, DenseLimitError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (IllConditionedError, ConvergenceError, ZeroDivisionError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
