"""Command-line experiment drivers: moduli tables, accuracy sweeps, model heatmaps, self-checks.

All tabular output is CSV (UTF-8, header row, LF line endings). Floats are
written with ``repr`` so a rerun with the same arguments is byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field

import numpy as np

from .emulate import PHASES, EmulationConfig, gemm_blocked
from .models import (
    HardwareProfile,
    ModelQuery,
    correction_from_matmuls,
    matmul_count,
    throughput,
)
from .moduli import N_MAX, N_MIN, as_scheme, build_moduli, effective_bits, log2_int
from .oracle import error_stats, exact_gemm, gen_matrix, gen_normal, sequential_gemm_f64
from .verify import run_verify

ACCURACY_COLUMNS = ["m", "n", "k", "phi", "scheme", "mode", "N", "max_rel", "median_rel", "seed"]
BREAKDOWN_COLUMNS = [f"{p}_s" for p in PHASES] + ["lowprec_gemms"]
MODULI_COLUMNS = ["index", "p", "square", "s", "log2P", "matmuls_fast", "matmuls_accurate", "effective_bits"]


@dataclass
class RunSpec:
    """Parsed and validated arguments of one CLI invocation."""

    subcommand: str
    dims: list[tuple[int, int, int]] = field(default_factory=list)
    phi: list[float] = field(default_factory=list)
    schemes: list[str] = field(default_factory=list)
    modes: list[str] = field(default_factory=list)
    Ns: list[int] = field(default_factory=list)
    seed: int = 0
    out: str | None = None
    block: tuple[int, int] | None = None


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _grid(text: str) -> list[float]:
    """``a,b,c`` or ``lo:hi:count`` (inclusive linear sweep)."""
    if ":" in text:
        try:
            lo, hi, count = text.split(":")
            vals = np.linspace(float(lo), float(hi), int(count)).tolist()
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected lo:hi:count, got {text!r}") from None
        if not vals:
            raise argparse.ArgumentTypeError("empty grid")
        return vals
    return _float_list(text)


def _dims(text: str) -> tuple[int, int, int]:
    vals = _int_list(text)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"--dims takes m,n,k, got {text!r}")
    return tuple(vals)


def _block(text: str) -> tuple[int, int]:
    vals = _int_list(text)
    if len(vals) != 2 or min(vals) <= 0:
        raise argparse.ArgumentTypeError(f"--block takes two positive sizes mB,nB, got {text!r}")
    return tuple(vals)


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ozaki8", description="DGEMM emulation on simulated INT8/FP8 units.")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("moduli", help="tabulate a moduli family")
    p.add_argument("--scheme", default="fp8-hybrid")
    p.add_argument("--moduli", type=int, required=True, metavar="N")
    p.add_argument("--out")

    p = sub.add_parser("accuracy", help="accuracy sweep against the exact product")
    p.add_argument("--dims", type=_dims, nargs="+", default=[(64, 64, 1024)], metavar="m,n,k")
    p.add_argument("--phi", type=_float_list, default=[0.0, 0.5, 1.0, 2.0])
    p.add_argument("--scheme", type=_str_list, default=["fp8-hybrid"])
    p.add_argument("--mode", type=_str_list, default=["fast", "accurate"])
    p.add_argument("--moduli", type=_int_list, default=[12], metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--block", type=_block, metavar="mB,nB")
    p.add_argument("--matrix", choices=["phi", "normal", "identity"], default="phi")
    p.add_argument("--breakdown", action="store_true", help="append phase timings (not reproducible)")
    p.add_argument("--out")

    p = sub.add_parser("model", help="predicted-throughput heatmap")
    p.add_argument("--dims", type=_dims, default=(16384, 16384, 16384), metavar="m,n,k")
    p.add_argument("--scheme", default="int8")
    p.add_argument("--mode", default="fast")
    p.add_argument("--moduli", type=int, default=16, metavar="N")
    p.add_argument("--ops", type=_grid, default=[1e15, 2e15, 3e15, 4e15, 5e15])
    p.add_argument("--bandwidth", type=_grid, default=[2e12, 4e12, 6e12, 8e12])
    p.add_argument("--correction", type=float, help="overhead c (default: product count)")
    p.add_argument("--all-products", action="store_true", help="charge 3N FP8 products instead of N")
    p.add_argument("--out")

    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument("--level", choices=["quick", "full"], default="quick")
    p.add_argument("--seed", type=int, default=0)
    return ap


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def cmd_moduli(scheme, N: int) -> list[list[str]]:
    ms = build_moduli(scheme, N)
    method = "int8-ozaki2" if ms.scheme.value == "int8" else "fp8-ozaki2"
    rows = [MODULI_COLUMNS]
    P = 1
    for i, (p, sq, s) in enumerate(zip(ms.p, ms.square, ms.s), start=1):
        P *= p
        rows.append([
            str(i), str(p), str(int(sq)), "" if s is None else str(s),
            _fmt(log2_int(P)), str(matmul_count(method, "fast", i)),
            str(matmul_count(method, "accurate", i)), _fmt(effective_bits(P)),
        ])  # fmt: skip
    return rows


def _inputs(kind: str, m: int, n: int, k: int, phi: float, seed: int):
    if kind == "identity":
        return np.eye(m, k), np.eye(k, n)
    if kind == "normal":
        return gen_normal(m, k, seed), gen_normal(k, n, seed + 1)
    return gen_matrix(m, k, phi, seed), gen_matrix(k, n, phi, seed + 1)


def cmd_accuracy(spec: RunSpec, matrix: str = "phi", breakdown: bool = False) -> list[list[str]]:
    """One row per (dims, phi, scheme, mode, N) grid point, in grid order.

    ``A`` uses ``seed`` and ``B`` uses ``seed + 1``. The scheme ``fp64`` adds a
    reference row for sequential binary64 accumulation (mode ``native``, N 0).
    """
    header = ACCURACY_COLUMNS + (BREAKDOWN_COLUMNS if breakdown else [])
    rows = [header]
    for m, n, k in spec.dims:
        for phi in spec.phi:
            A, B = _inputs(matrix, m, n, k, phi, spec.seed)
            ref = exact_gemm(A, B)
            for scheme in spec.schemes:
                if scheme == "fp64":
                    st = error_stats(sequential_gemm_f64(A, B), ref)
                    row = [m, n, k, phi, "fp64", "native", 0, st.max_rel, st.median_rel, spec.seed]
                    rows.append([_fmt(v) for v in row] + ([""] * len(BREAKDOWN_COLUMNS) if breakdown else []))
                    continue
                for mode in spec.modes:
                    for N in spec.Ns:
                        mb, nb = spec.block or (None, None)
                        cfg = EmulationConfig(scheme, mode, N, mb, nb)
                        res = gemm_blocked(A, B, cfg)
                        st = error_stats(res.C, ref)
                        row = [m, n, k, phi, cfg.scheme.value, cfg.mode.value, N, st.max_rel, st.median_rel, spec.seed]
                        if breakdown:
                            row += [res.stats.seconds[p] for p in PHASES] + [res.stats.lowprec_gemms]
                        rows.append([_fmt(v) for v in row])
    return rows


def cmd_model(
    dims, scheme, mode, N: int, ops: list[float], bandwidth: list[float], correction=None, all_products=False
) -> list[list[str]]:
    """Heatmap of predicted TFLOP/s: one row per ops value, one column per bandwidth value."""
    m, n, k = dims
    if min(m, n, k) <= 0:
        raise ValueError("model grid needs positive dimensions")
    if not ops or not bandwidth:
        raise ValueError("model grid is empty")
    q = ModelQuery(m, n, k, N, scheme, mode)
    c = correction_from_matmuls(q) if correction is None else correction
    rows = [["ops\\bandwidth"] + [_fmt(b) for b in bandwidth]]
    for o in ops:
        cells = [throughput(q, HardwareProfile(o, b, c), all_products) / 1e12 for b in bandwidth]
        rows.append([_fmt(o)] + [_fmt(x) for x in cells])
    return rows


def write_csv(rows, out_path=None) -> None:
    """Write rows as UTF-8 CSV with LF endings to ``out_path`` or stdout."""
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            _writer(fh).writerows(rows)
    else:
        _writer(sys.stdout).writerows(rows)


def _check_spec(spec: RunSpec, ap: argparse.ArgumentParser) -> None:
    for m, n, k in spec.dims:
        if min(m, n, k) <= 0:
            ap.error("dimensions must be positive")
    if any(phi < 0 for phi in spec.phi):
        ap.error("phi must be non-negative")
    for s in spec.schemes:
        if s == "fp64":
            continue
        try:
            scheme = as_scheme(s)
        except ValueError:
            ap.error(f"unknown scheme {s!r}")
        for N in spec.Ns:
            if not N_MIN <= N <= N_MAX[scheme]:
                ap.error(f"N={N} outside [{N_MIN}, {N_MAX[scheme]}] for {scheme.value}")
    for mode in spec.modes:
        if mode not in ("fast", "accurate"):
            ap.error(f"unknown mode {mode!r}")


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.subcommand == "verify":
        results = run_verify(args.level, args.seed)
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return 0 if all(ok for _, ok, _ in results) else 1
    try:
        if args.subcommand == "moduli":
            rows = cmd_moduli(args.scheme, args.moduli)
        elif args.subcommand == "model":
            rows = cmd_model(
                args.dims, args.scheme, args.mode, args.moduli,
                args.ops, args.bandwidth, args.correction, args.all_products,
            )  # fmt: skip
        else:
            spec = RunSpec(
                "accuracy", dims=args.dims, phi=args.phi, schemes=args.scheme, modes=args.mode,
                Ns=args.moduli, seed=args.seed, out=args.out, block=args.block,
            )  # fmt: skip
            _check_spec(spec, ap)
            rows = cmd_accuracy(spec, args.matrix, args.breakdown)
    except ValueError as exc:
        ap.error(str(exc))
    write_csv(rows, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
