"""Software FP8_E4M3 codec and simulated low-precision matrix-multiply units.

FP8 matrices are carried as ``uint8`` arrays of raw codes, binary32 results as
``float32`` arrays and INT8 operands as ``int8`` arrays.
"""

from __future__ import annotations

import enum

import numpy as np

FP8_MAX = 448.0
FP8_MAX_K = 1 << 16
INT8_MAX_K = 1 << 17


class RoundingMode(str, enum.Enum):
    NEAREST = "nearest-even"
    UP = "toward-positive"
    DOWN = "toward-negative"
    ZERO = "toward-zero"


class AccumulatorOverflow(ArithmeticError):
    """Raised when a simulated INT8 MMA result leaves the signed 32-bit range."""


def _decode_table() -> np.ndarray:
    table = np.empty(256, dtype=np.float64)
    for code in range(256):
        sign = -1.0 if code & 0x80 else 1.0
        exp = (code >> 3) & 0xF
        mant = code & 0x7
        if exp == 0xF and mant == 0x7:
            table[code] = np.nan
        elif exp == 0:
            table[code] = sign * mant * 2.0**-9
        else:
            table[code] = sign * (1.0 + mant / 8.0) * 2.0 ** (exp - 7)
    return table


_DECODE = _decode_table()
_DECODE_F32 = _DECODE.astype(np.float32)
# Positive finite codes 0x00..0x7E are monotone in value, so the code is the index.
_POSITIVE = _DECODE[:0x7F].copy()
_NAN_CODES = (0x7F, 0xFF)


def _as_mode(mode) -> RoundingMode:
    return mode if isinstance(mode, RoundingMode) else RoundingMode(mode)


def fp8_decode(codes):
    """Exact value of one code or an array of codes (NaN for 0x7F/0xFF)."""
    arr = np.asarray(codes)
    if arr.ndim == 0:
        return float(_DECODE[int(arr) & 0xFF])
    return _DECODE[arr.astype(np.uint8)]


def fp8_encode(x, mode=RoundingMode.NEAREST):
    """Round binary64 value(s) to FP8_E4M3 codes under ``mode``.

    Magnitudes above 448 saturate to +-448 in every mode; the format has no
    infinities so 448 is both the nearest and the inward neighbour.
    """
    mode = _as_mode(mode)
    arr = np.asarray(x, dtype=np.float64)
    if np.isnan(arr).any():
        raise ValueError("cannot encode NaN as FP8_E4M3")
    neg = np.signbit(arr)
    mag = np.abs(arr)

    lo = np.searchsorted(_POSITIVE, mag, side="right") - 1
    lo = np.clip(lo, 0, 0x7E)
    hi = np.minimum(lo + 1, 0x7E)
    exact = _POSITIVE[lo] == mag

    if mode is RoundingMode.NEAREST:
        dlo = mag - _POSITIVE[lo]
        dhi = _POSITIVE[hi] - mag
        pick_hi = (dhi < dlo) | ((dhi == dlo) & (lo & 1 == 1))
    elif mode is RoundingMode.ZERO:
        pick_hi = np.zeros(mag.shape, dtype=bool)
    elif mode is RoundingMode.UP:
        pick_hi = ~neg
    else:
        pick_hi = neg
    code = np.where(exact, lo, np.where(pick_hi, hi, lo))
    code = np.where(mag >= FP8_MAX, 0x7E, code)
    code = (code | np.where(neg, 0x80, 0)).astype(np.uint8)
    if code.ndim == 0:
        return int(code)
    return code


def fp8_from_int(values) -> np.ndarray:
    """Encode small integers (|v| <= 16) exactly; raises if any is not representable."""
    arr = np.asarray(values, dtype=np.int64)
    if arr.size and np.abs(arr).max() > 16:
        raise ValueError("integer digit outside the exact FP8 window [-16, 16]")
    return _SMALL_INT_CODES[arr + 16]


_SMALL_INT_CODES = fp8_encode(np.arange(-16, 17, dtype=np.float64))


def _check_codes(A: np.ndarray, B: np.ndarray, max_k: int) -> None:
    if A.ndim != 2 or B.ndim != 2:
        raise ValueError("operands must be 2-D")
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"inner dimensions differ: {A.shape} x {B.shape}")
    if A.shape[1] > max_k:
        raise ValueError(f"k = {A.shape[1]} exceeds the supported maximum {max_k}")


def _exact_integer_window(a: np.ndarray, b: np.ndarray):
    """Exact integer product if every partial sum is an integer of magnitude <= 2**24."""
    if not (np.all(a == np.trunc(a)) and np.all(b == np.trunc(b))):
        return None
    # Integer sums below 2**53 are exact in binary64 whatever order BLAS uses.
    a64 = a.astype(np.float64)
    b64 = b.astype(np.float64)
    crude = np.abs(a64).sum(axis=1).max(initial=0) * np.abs(b64).max(initial=0)
    if crude > 1 << 24 and (np.abs(a64) @ np.abs(b64)).max(initial=0) > 1 << 24:
        return None
    return a64 @ b64


def sequential_fp32_gemm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Left-to-right binary32 accumulation of exact products, one h at a time."""
    m, k = a.shape
    acc = np.zeros((m, b.shape[1]), dtype=np.float32)
    for h in range(k):
        # E4M3 x E4M3 products carry at most 8 significant bits: exact in binary32.
        acc += np.multiply.outer(a[:, h], b[h, :])
    return acc


def fp8_gemm(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Simulated FP8 MMA: FP8_E4M3 codes in, binary32 accumulation out."""
    A = np.asarray(A, dtype=np.uint8)
    B = np.asarray(B, dtype=np.uint8)
    _check_codes(A, B, FP8_MAX_K)
    if np.isin(A, _NAN_CODES).any() or np.isin(B, _NAN_CODES).any():
        raise ValueError("NaN code in FP8 operand")
    a = _DECODE_F32[A]
    b = _DECODE_F32[B]
    # Inside the error-free window every partial sum is exact, so the integer
    # product is bit-identical to the sequential binary32 loop.
    exact = _exact_integer_window(a, b)
    if exact is not None:
        return exact.astype(np.float32)
    return sequential_fp32_gemm(a, b)


def int8_gemm(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Simulated INT8 MMA with the INT32 accumulator contract enforced."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.dtype != np.int8 or B.dtype != np.int8:
        raise TypeError("int8_gemm operands must have dtype int8")
    _check_codes(A, B, INT8_MAX_K)
    # |sum| <= 2**31 for k <= 2**17, so binary64 BLAS is exact here.
    C = (A.astype(np.float64) @ B.astype(np.float64)).astype(np.int64)
    if C.size and (C.max() > np.iinfo(np.int32).max or C.min() < np.iinfo(np.int32).min):
        raise AccumulatorOverflow("INT8 MMA result does not fit in INT32")
    return C.astype(np.int32)


def to_binary32(x, mode=RoundingMode.NEAREST):
    """Narrow binary64 value(s) to binary32 with a directed rounding mode."""
    mode = _as_mode(mode)
    x64 = np.asarray(x, dtype=np.float64)
    f = x64.astype(np.float32)
    if mode is RoundingMode.NEAREST:
        out = f
    else:
        back = f.astype(np.float64)
        if mode is RoundingMode.UP:
            fix = back < x64
            out = np.where(fix, np.nextafter(f, np.float32(np.inf)), f)
        elif mode is RoundingMode.DOWN:
            fix = back > x64
            out = np.where(fix, np.nextafter(f, np.float32(-np.inf)), f)
        else:
            fix = np.abs(back) > np.abs(x64)
            out = np.where(fix, np.nextafter(f, np.float32(0.0)), f)
        out = out.astype(np.float32)
    if out.ndim == 0:
        return np.float32(out)
    return out


def dyadic_to_float64(num: int, exp: int) -> float:
    """Correctly rounded binary64 value of ``num * 2**exp``.

    Overflow returns a signed infinity, underflow follows gradual underflow.
    """
    if num == 0:
        return 0.0
    if exp >= 0:
        try:
            return float(num << exp)
        except OverflowError:
            return float("inf") if num > 0 else float("-inf")
    try:
        return num / (1 << -exp)
    except OverflowError:
        return float("inf") if num > 0 else float("-inf")
