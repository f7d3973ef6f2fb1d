"""Analytic time, workspace and matmul-count models for Ozaki-scheme DGEMM emulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .moduli import Scheme, as_scheme, build_moduli, effective_bits

_MODES = ("fast", "accurate")


@dataclass(frozen=True)
class HardwareProfile:
    """Sustained low-precision GEMM rate ``ops`` (OP/s), bandwidth ``b`` (B/s), overhead ``c``."""

    ops: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.ops > 0 and self.b > 0 and self.c >= 0):
            raise ValueError("ops and b must be positive and c non-negative")


@dataclass(frozen=True)
class ModelQuery:
    m: int
    n: int
    k: int
    N: int
    scheme: str = "fp8-hybrid"
    mode: str = "accurate"

    def __post_init__(self):
        if min(self.m, self.n, self.k) < 0:
            raise ValueError("dimensions must be non-negative")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        object.__setattr__(self, "scheme", _model_scheme(self.scheme))


def _model_scheme(scheme) -> str:
    s = as_scheme(scheme)
    # The FP8 models describe the hybrid pipeline; plain Karatsuba is not modelled.
    if s is Scheme.FP8_KARATSUBA:
        raise ValueError("time and workspace models cover int8 and fp8-hybrid only")
    return s.value


def padded(q: ModelQuery, multiple: int = 256) -> ModelQuery:
    """Round every dimension up to a multiple of ``multiple``."""

    def up(x):
        return -(-x // multiple) * multiple

    return replace(q, m=up(q.m), n=up(q.n), k=up(q.k))


def m_of_n(N: int) -> int:
    """Number of FP8 digit matrices per operand for the hybrid moduli (6 squares first)."""
    if not 1 <= N <= 33:
        raise ValueError("M_N is defined for 1 <= N <= 33")
    return 2 * N if N <= 6 else 3 * N - 6


def time_model(q: ModelQuery, hw: HardwareProfile, all_products: bool = False) -> float:
    """Predicted emulation time in seconds.

    The FP8 closed forms charge ``N`` (fast) or ``N + 1`` (accurate) GEMMs at
    rate ``ops``. With ``all_products=True`` the GEMM term instead charges the
    ``3N`` / ``3N + 1`` FP8 products the hybrid pipeline actually issues.
    """
    m, n, k, N, c = q.m, q.n, q.k, q.N, hw.c
    ops, b = hw.ops, hw.b
    mn, mpn = m * n, m + n
    if q.scheme == "int8":
        if q.mode == "fast":
            return 2 * mn * k * N / ops + (12 + 6 * N + 2 * c) * mn / b + ((16 + N + c) * k + 2) * mpn / b
        return (
            2 * mn * k * (N + 1) / ops
            + (20 + 6 * N + 2 * c) * mn / b
            + (((17 + N + c) * k + 4) * mpn + 2 * k * m + 2 * n) / b
        )
    M = m_of_n(N)
    G = 3 * N if all_products else N
    if q.mode == "fast":
        return 2 * mn * k * G / ops + (12 + 2 * c + 4 * N + 4 * M) * mn / b + ((16 + M + c) * k + 2) * mpn / b
    return (
        2 * mn * k * (G + 1) / ops
        + (20 + 2 * c + 4 * N + 4 * M) * mn / b
        + (((17 + M + c) * k + 4) * mpn + 2 * k * m + 2 * n) / b
    )


def throughput(q: ModelQuery, hw: HardwareProfile, all_products: bool = False) -> float:
    """Equivalent DGEMM rate ``2mnk / T`` in FLOP/s."""
    t = time_model(q, hw, all_products)
    return 2.0 * q.m * q.n * q.k / t if t > 0 else 0.0


def workspace(scheme, m: int, n: int, k: int, N: int) -> int:
    """Working-memory footprint in bytes, excluding inputs and output."""
    if _model_scheme(scheme) == "int8":
        return (m * k + k * n + 5 * m * n) * N + 2 * (m + n)
    M = m_of_n(N)
    return (m * k + k * n + 4 * m * n) * M + 2 * N * m * n + 2 * (m + n)


def blocked_time(
    q: ModelQuery, hw: HardwareProfile, m_blk: int, n_blk: int, k_blk: int, all_products: bool = False
) -> float:
    """First-order time when the call is split into ``m_blk x n_blk x k_blk`` subproblems."""
    if min(m_blk, n_blk, k_blk) <= 0:
        raise ValueError("block sizes must be positive")
    sub = replace(q, m=min(m_blk, q.m), n=min(n_blk, q.n), k=min(k_blk, q.k))
    count = math.ceil(q.m / m_blk) * math.ceil(q.n / n_blk) * math.ceil(q.k / k_blk)
    return time_model(sub, hw, all_products) * count


METHODS = ("fp8-ozaki1", "fp8-ozaki2", "int8-ozaki2")


def matmul_count(method: str, mode: str, param: int) -> int:
    """Low-precision matrix products needed; ``param`` is S (slices) or N (moduli)."""
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}")
    if param < 1:
        raise ValueError("slice/moduli count must be positive")
    acc = mode == "accurate"
    if method == "fp8-ozaki1":
        return param * param if acc else param * (param + 1) // 2
    if method == "fp8-ozaki2":
        return 3 * param + acc
    if method == "int8-ozaki2":
        return param + acc
    raise ValueError(f"unknown method {method!r}")


def method_effective_bits(method: str, param: int) -> float:
    """5S - 1 for Ozaki-I slices, log2 sqrt(P/2) for Ozaki-II moduli."""
    if method == "fp8-ozaki1":
        return float(5 * param - 1)
    if method == "fp8-ozaki2":
        return effective_bits(build_moduli(Scheme.FP8_HYBRID, param))
    if method == "int8-ozaki2":
        return effective_bits(build_moduli(Scheme.INT8, param))
    raise ValueError(f"unknown method {method!r}")


def correction_from_matmuls(q: ModelQuery) -> int:
    """Initial ``c``: the number of low-precision products of the configuration."""
    method = "int8-ozaki2" if q.scheme == "int8" else "fp8-ozaki2"
    return matmul_count(method, q.mode, q.N)


def correction_fp64_indicator(q: ModelQuery, b: float, fp64_flops: float) -> float:
    """Rough ``c`` indicator: #products * bandwidth / FP64 rate."""
    return correction_from_matmuls(q) * b / fp64_flops
