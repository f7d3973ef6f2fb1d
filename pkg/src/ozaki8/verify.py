"""Self-check suites behind ``ozaki8 verify``.

Each check returns ``(ok, detail)``. ``digits_fn`` replaces the digit
decomposition in the checks that exercise it, which is how a deliberately
broken rule is shown to be caught.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import quantize as qz
from .emulate import EmulationConfig, crt_combine, gemm_emulated, modprod_int8, modprod_karatsuba, modprod_square
from .lowprec import RoundingMode, fp8_decode, fp8_encode, fp8_gemm, int8_gemm
from .models import HardwareProfile, ModelQuery, matmul_count, throughput, workspace
from .moduli import Scheme, build_moduli, greedy_family
from .oracle import exact_int_gemm

PREFIXES = {
    Scheme.INT8: (256, 255, 253, 251, 247, 241, 239, 233, 229, 227),
    Scheme.FP8_KARATSUBA: (513, 512, 511, 509, 505, 503, 499, 493, 491, 487),
    Scheme.FP8_HYBRID: (1089, 1024, 961, 841, 625, 529, 511, 509, 503, 499),
}


def check_moduli(rng, level, digits_fn):
    for scheme, head in PREFIXES.items():
        fam = [p for p, _, _ in greedy_family(scheme)]
        if tuple(fam[:10]) != head:
            return False, f"{scheme.value} prefix {fam[:10]}"
        for i, a in enumerate(fam):
            if any(math.gcd(a, b) != 1 for b in fam[i + 1 :]):
                return False, f"{scheme.value} not pairwise coprime"
    return True, "prefixes match, families pairwise coprime"


def check_precision(rng, level, digits_fn):
    cases = [(Scheme.INT8, 14, 109), (Scheme.FP8_KARATSUBA, 13, 115), (Scheme.FP8_HYBRID, 12, 110)]
    for scheme, N, bits in cases:
        if not build_moduli(scheme, N).P > 2 ** (bits + 1):
            return False, f"{scheme.value} N={N}: P/2 <= 2**{bits}"
    for scheme, bits in [(Scheme.INT8, 341), (Scheme.FP8_KARATSUBA, 713), (Scheme.FP8_HYBRID, 746)]:
        P = math.prod(p for p, _, _ in greedy_family(scheme))
        if not P < 2 ** (bits + 1):
            return False, f"{scheme.value} family P/2 >= 2**{bits}"
    return True, "P bounds hold"


def check_fp8_codec(rng, level, digits_fn):
    for c in range(256):
        if c in (0x7F, 0xFF):
            continue
        for mode in RoundingMode:
            if fp8_encode(fp8_decode(c), mode) != c:
                return False, f"round trip failed for code {c:#04x} ({mode.value})"
    xs = rng.uniform(-448, 448, 2000)
    lo = fp8_decode(fp8_encode(xs, RoundingMode.DOWN))
    hi = fp8_decode(fp8_encode(xs, RoundingMode.UP))
    if not (np.all(lo <= xs) and np.all(xs <= hi)):
        return False, "directed rounding order violated"
    return True, "round trip and directed order"


def check_fp8_window(rng, level, digits_fn):
    seeds = 100 if level == "full" else 10
    for k in (1, 257, 4096):
        for _ in range(seeds):
            a = rng.integers(-16, 17, size=(4, k))
            b = rng.integers(-16, 17, size=(k, 4))
            got = fp8_gemm(fp8_encode(a.astype(float)), fp8_encode(b.astype(float)))
            if not np.array_equal(got.astype(np.int64), a @ b):
                return False, f"fp8_gemm inexact at k={k}"
    return True, "fp8_gemm exact on digit matrices"


def check_digits(rng, level, digits_fn):
    ms = build_moduli(Scheme.FP8_HYBRID, 33)
    for p, sq, s in zip(ms.p, ms.square, ms.s):
        half = (p + 1) // 2
        r = np.arange(-(p // 2), half, dtype=np.int64)
        d = digits_fn(qz.Residues(p, r.astype(np.int16)), sq, s)
        d1 = fp8_decode(d.d1)
        d2 = fp8_decode(d.d2)
        if not np.array_equal(s * d1 + d2, r):
            return False, f"digit reconstruction failed for p={p}"
        if np.abs(d1).max() > 16 or np.abs(d2).max() > 16:
            return False, f"digit bound exceeded for p={p}"
        if not sq and not np.array_equal(fp8_decode(d.d3), d1 + d2):
            return False, f"D3 != D1 + D2 for p={p}"
    return True, "s*D1 + D2 = r for every hybrid modulus and residue"


def _rand_residues(rng, p, shape):
    return qz.Residues(p, qz.symmetric_mod(rng.integers(0, p, size=shape), p).astype(np.int16))


def check_modprod(rng, level, digits_fn):
    trials = 100 if level == "full" else 20
    hybrid = build_moduli(Scheme.FP8_HYBRID, 33)
    squares = [i for i in range(hybrid.N) if hybrid.square[i]]
    others = [i for i in range(hybrid.N) if not hybrid.square[i]]
    int8 = build_moduli(Scheme.INT8, 29)
    for t in range(trials):
        for pool in (squares, others):
            m, n, k = rng.integers(1, 9), rng.integers(1, 9), rng.integers(1, 513)
            i = pool[t % len(pool)]
            p, sq, s = hybrid.p[i], hybrid.square[i], hybrid.s[i]
            A = _rand_residues(rng, p, (m, k))
            B = _rand_residues(rng, p, (k, n))
            ref = qz.symmetric_mod(A.values.astype(np.int64) @ B.values.astype(np.int64), p)
            Ad, Bd = digits_fn(A, sq, s), digits_fn(B, sq, s)
            got = (modprod_square if sq else modprod_karatsuba)(Ad, Bd).values
            if not np.array_equal(got, ref):
                return False, f"FP8 modular product wrong for p={p}"
        m, n, k = rng.integers(1, 9), rng.integers(1, 9), rng.integers(1, 513)
        p8 = int8.p[t % int8.N]
        A8 = _rand_residues(rng, p8, (m, k))
        B8 = _rand_residues(rng, p8, (k, n))
        ref8 = qz.symmetric_mod(A8.values.astype(np.int64) @ B8.values.astype(np.int64), p8)
        if not np.array_equal(modprod_int8(A8, B8).values, ref8):
            return False, f"INT8 modular product wrong for p={p8}"
    return True, "modular products match 64-bit oracles"


def check_crt(rng, level, digits_fn):
    count = 1000 if level == "full" else 100
    for scheme, N in [(Scheme.INT8, 14), (Scheme.FP8_KARATSUBA, 13), (Scheme.FP8_HYBRID, 12)]:
        ms = build_moduli(scheme, N)
        P = ms.P
        xs = [int.from_bytes(rng.bytes(P.bit_length() // 8 + 2), "little") % P - (P - 1) // 2 for _ in range(count)]
        X = np.array(xs, dtype=object).reshape(1, -1)
        res = [qz.Residues(p, np.array([[qz.symmetric_mod(x, p) for x in xs]], dtype=np.int64)) for p in ms.p]
        back = crt_combine(res, ms.plan)
        if not all(int(a) == int(b) for a, b in zip(back.ravel(), X.ravel())):
            return False, f"CRT round trip failed for {scheme.value}"
    return True, "CRT reconstruction exact"


def check_end_to_end(rng, level, digits_fn):
    seeds = 100 if level == "full" else 5
    cfg = EmulationConfig(Scheme.FP8_HYBRID, "accurate", 12)
    for _ in range(seeds):
        A = rng.integers(-(2**20), 2**20 + 1, size=(16, 64)).astype(np.float64)
        B = rng.integers(-(2**20), 2**20 + 1, size=(64, 16)).astype(np.float64)
        C = gemm_emulated(A, B, cfg).C
        ref = exact_int_gemm(A.astype(np.int64).astype(object), B.astype(np.int64).astype(object))
        if not all(float(r) == c for r, c in zip(ref.ravel(), C.ravel())):
            return False, "integer inputs not reproduced exactly"
    return True, "integer-input product exact"


def check_int8_contract(rng, level, digits_fn):
    a = np.full((1, 1), -128, dtype=np.int8)
    if int(int8_gemm(a, a)[0, 0]) != 16384:
        return False, "int8_gemm [-128]*[-128]"
    return True, "int8 accumulate contract"


def check_matmul_counts(rng, level, digits_fn):
    rows = [
        ("fp8-ozaki1", 11, 66, 121), ("fp8-ozaki1", 12, 78, 144), ("fp8-ozaki1", 13, 91, 169),
        ("fp8-ozaki2", 12, 36, 37), ("fp8-ozaki2", 13, 39, 40), ("fp8-ozaki2", 14, 42, 43),
        ("int8-ozaki2", 14, 14, 15), ("int8-ozaki2", 15, 15, 16),
        ("int8-ozaki2", 16, 16, 17), ("int8-ozaki2", 17, 17, 18),
    ]  # fmt: skip
    for method, param, fast, acc in rows:
        if (matmul_count(method, "fast", param), matmul_count(method, "accurate", param)) != (fast, acc):
            return False, f"{method} {param}"
    return True, "low-precision product counts"


def check_models(rng, level, digits_fn):
    if workspace("int8", 16384, 16384, 16384, 14) != 26_306_740_224:
        return False, "W_i8"
    if workspace("fp8-hybrid", 16384, 16384, 16384, 12) != 54_760_898_560:
        return False, "W_f8"
    q = ModelQuery(16384, 16384, 16384, 16, "int8", "fast")
    lo = throughput(q, HardwareProfile(3e15, 2e12, 16)) / 1e12
    hi = throughput(q, HardwareProfile(3e15, 8e12, 16)) / 1e12
    if not (lo <= 112 * 1.15 and hi >= 153 * 0.85):
        return False, f"INT8 bracket [{lo:.1f}, {hi:.1f}]"
    return True, "workspace and throughput bracket"


CHECKS: dict[str, Callable] = {
    "moduli-prefixes-coprime": check_moduli,
    "precision-thresholds": check_precision,
    "fp8-codec": check_fp8_codec,
    "fp8-exactness-window": check_fp8_window,
    "digit-reconstruction": check_digits,
    "modular-products": check_modprod,
    "crt-roundtrip": check_crt,
    "end-to-end-integer": check_end_to_end,
    "int8-contract": check_int8_contract,
    "matmul-counts": check_matmul_counts,
    "models": check_models,
}


def run_verify(level: str = "quick", seed: int = 0, digits_fn=qz.digits) -> list[tuple[str, bool, str]]:
    """Run every check; returns ``(name, ok, detail)`` rows in a fixed order."""
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    out = []
    for name, fn in CHECKS.items():
        rng = np.random.default_rng([seed, len(out)])
        try:
            ok, detail = fn(rng, level, digits_fn)
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, ok, detail))
    return out
