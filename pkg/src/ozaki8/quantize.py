"""Conversion of binary64 matrices to scaled integers, residues and FP8 digits.

Scaling vectors are handled as ``int16`` arrays of base-2 exponents: row
exponents for the left operand (``axis="rows"``) and column exponents for
the right operand (``axis="cols"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lowprec import RoundingMode, fp8_encode, fp8_from_int, fp8_gemm, to_binary32
from .moduli import ModuliSet, Scheme, log2_int

_AXES = ("rows", "cols")
# to_integral refuses scaled magnitudes from here on.
INTEGRAL_LIMIT = 2.0**970

# FP32 round-down of -1/(2 - 2**-21).
DELTA = to_binary32(-1.0 / (2.0 - 2.0**-21), RoundingMode.DOWN)


@dataclass(frozen=True)
class Residues:
    """Symmetric residues of a matrix modulo ``p``."""

    p: int
    values: np.ndarray

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class DigitMatrices:
    """FP8 digit factors of a residue matrix: ``s*D1 + D2`` reconstructs it.

    ``d3`` holds ``D1 + D2`` for Karatsuba (non-square) moduli and is None for
    square moduli.
    """

    p: int
    s: int
    square: bool
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray | None = None


def _check_axis(axis: str) -> None:
    if axis not in _AXES:
        raise ValueError(f"axis must be 'rows' or 'cols', got {axis!r}")


def _reduce_axis(axis: str) -> int:
    # Row scaling reduces over columns of the row, and vice versa.
    return 1 if axis == "rows" else 0


def _broadcast(exps: np.ndarray, axis: str) -> np.ndarray:
    e = np.asarray(exps, dtype=np.int64)
    return e[:, None] if axis == "rows" else e[None, :]


def _to_int16(e: np.ndarray) -> np.ndarray:
    info = np.iinfo(np.int16)
    if e.size and (e.max() > info.max or e.min() < info.min):
        raise OverflowError("scaling exponent does not fit in int16")
    return e.astype(np.int16)


def ufp(x) -> float:
    """Unit in the first place, ``2**floor(log2|x|)``."""
    x = float(x)
    if x == 0.0 or not math.isfinite(x):
        raise ValueError("ufp needs a finite non-zero argument")
    _, e = math.frexp(x)
    return math.ldexp(1.0, e - 1)


def _ufp_exponent(a: np.ndarray) -> np.ndarray:
    _, e = np.frexp(a)
    return e.astype(np.int64) - 1


def symmetric_mod(x, p: int):
    """Representative of ``x mod p`` in ``[-floor(p/2), ceil(p/2) - 1]``."""
    if p < 2:
        raise ValueError("modulus must be at least 2")
    half = (p + 1) // 2
    if isinstance(x, (int, np.integer)):
        r = int(x) % p
        return r - p if r >= half else r
    arr = np.asarray(x)
    r = np.mod(arr, p)
    return np.where(r >= half, r - p, r)


def _pow2_mod_table(p: int, n: int) -> np.ndarray:
    t = np.empty(n, dtype=np.int64)
    v = 1 % p
    for i in range(n):
        t[i] = v
        v = (v * 2) % p
    return t


_POW2_CACHE: dict[int, np.ndarray] = {}


def _pow2_mod(p: int) -> np.ndarray:
    # Integral binary64 values have exponents below 1024.
    if p not in _POW2_CACHE:
        _POW2_CACHE[p] = _pow2_mod_table(p, 1024)
    return _POW2_CACHE[p]


def _split_integral(v: np.ndarray):
    """Write integer-valued binary64 entries as ``m * 2**e`` with |m| < 2**53, e >= 0."""
    f, E = np.frexp(v)
    e = E.astype(np.int64) - 53
    m = np.ldexp(f, 53).astype(np.int64)
    small = e < 0
    m = np.where(small, np.where(small, v, 0.0).astype(np.int64), m)
    e = np.where(small, 0, e)
    return m, e


def residue_of_integral(v, p: int):
    """Exact symmetric residue of integer-valued binary64 value(s) modulo ``p``."""
    arr = np.asarray(v, dtype=np.float64)
    if not np.all(arr == np.trunc(arr)):
        raise ValueError("residue_of_integral needs integer-valued input")
    m, e = _split_integral(arr)
    r = np.mod(np.mod(m, p) * _pow2_mod(p)[e], p)
    out = symmetric_mod(r, p)
    return int(out) if np.ndim(out) == 0 else out


def _row_norm_bound(M: np.ndarray, axis: str) -> np.ndarray:
    ax = _reduce_axis(axis)
    amax = np.abs(M).max(axis=ax)
    safe = np.where(amax > 0, amax, 1.0)
    t = _ufp_exponent(safe)
    scaled = np.ldexp(M, -(_broadcast(t, axis)))
    norm = np.sqrt((scaled * scaled).sum(axis=ax))
    # For k <= 2**17 the binary64 norm is off by less than 2**-35 relative.
    bound = np.ldexp(norm * (1.0 + 2.0**-30), t)
    return np.where(amax > 0, bound, 0.0)


def fast_scaling(M: np.ndarray, axis: str, P: int) -> np.ndarray:
    """Cauchy-Schwarz scaling exponents.

    Each exponent is the largest ``e`` with ``2**e * n <= sqrt((P-1)/2)``,
    where ``n`` is a certified upper bound on the row (column) 2-norm. Using
    the rule on both operands keeps ``2*sum|a'||b'| <= P - 1``.
    """
    _check_axis(axis)
    M = np.asarray(M, dtype=np.float64)
    if M.shape[_reduce_axis(axis)] > 1 << 17:
        raise ValueError("fast scaling supports k <= 2**17")
    norms = _row_norm_bound(M, axis)
    half = Fraction(P - 1, 2)
    log_half = 0.5 * (log2_int(P - 1) - 1.0)
    out = np.zeros(norms.shape, dtype=np.int64)
    for i, n in enumerate(norms):
        if n == 0.0:
            continue
        fn = Fraction(float(n))
        e = math.floor(log_half - math.log2(n))
        while Fraction(2) ** (2 * e) * fn * fn > half:
            e -= 1
        while Fraction(2) ** (2 * (e + 1)) * fn * fn <= half:
            e += 1
        out[i] = e
    return _to_int16(out)


def accurate_prescale(M: np.ndarray, axis: str):
    """``mu' = 2**7 / ufp(max|row|)`` and the scaled magnitudes cast upward to FP8.

    Returns ``(exponents, codes)``; codes encode ``|diag(mu') M|`` so that
    their product bounds ``sum |a||b|`` from above.
    """
    _check_axis(axis)
    M = np.asarray(M, dtype=np.float64)
    amax = np.abs(M).max(axis=_reduce_axis(axis))
    nz = amax > 0
    e = np.where(nz, 7 - _ufp_exponent(np.where(nz, amax, 1.0)), 0)
    scaled = np.ldexp(np.abs(M), _broadcast(e, axis))
    codes = fp8_encode(scaled, RoundingMode.UP)
    # Entries that underflowed during scaling must still bound from above.
    codes = np.where((M != 0) & (codes == 0), np.uint8(1), codes).astype(np.uint8)
    return _to_int16(e), codes


def accurate_prescale_int8(M: np.ndarray, axis: str):
    """INT8 variant: ``-ceil(2**6 / ufp(max|row|) * |M|)``, which lies in [-128, 0].

    Both operands are negated, so their INT8 product is the non-negative bound.
    """
    _check_axis(axis)
    M = np.asarray(M, dtype=np.float64)
    amax = np.abs(M).max(axis=_reduce_axis(axis))
    nz = amax > 0
    e = np.where(nz, 6 - _ufp_exponent(np.where(nz, amax, 1.0)), 0)
    scaled = np.ceil(np.ldexp(np.abs(M), _broadcast(e, axis)))
    scaled = np.where((M != 0) & (scaled == 0), 1.0, scaled)
    return _to_int16(e), (-scaled).astype(np.int8)


def bound_matrix(Abar: np.ndarray, Bbar: np.ndarray) -> np.ndarray:
    """Upward-rounded ``(1 + (k+1)*2**-24) * fp8_gemm(Abar, Bbar)`` in binary32."""
    k = np.asarray(Abar).shape[1]
    if k > 1 << 16:
        raise ValueError("bound_matrix supports k <= 2**16")
    Cp = fp8_gemm(Abar, Bbar)
    factor = to_binary32(1.0 + (k + 1) * 2.0**-24, RoundingMode.UP)
    # binary32 x binary32 is exact in binary64; only the final narrowing rounds.
    return to_binary32(Cp.astype(np.float64) * np.float64(factor), RoundingMode.UP)


def log2_lower(x: int, frac_bits: int = 64) -> Fraction:
    """Lower bound on log2(x) with ``frac_bits`` fractional bits (exact integer arithmetic).

    Digits come from repeated squaring of the normalised mantissa; every
    truncation rounds down, so the result never exceeds the true value.
    """
    if x <= 0:
        raise ValueError("log2 of a non-positive integer")
    n = x.bit_length() - 1
    work = frac_bits + 64
    y = (x << work) >> n  # x / 2**n in [1, 2), fixed point
    r = 0
    for _ in range(frac_bits):
        y = (y * y) >> work
        r <<= 1
        if y >> (work + 1):
            y >>= 1
            r |= 1
    return Fraction((n << frac_bits) + r, 1 << frac_bits)


def _f64_down(q: Fraction) -> float:
    f = float(q)
    return math.nextafter(f, -math.inf) if Fraction(f) > q else f


def log2_offset_base(P: int) -> np.float32:
    """FP32 round-down of ``(log2(P-1) - 1) / 2``."""
    return to_binary32(_f64_down((log2_lower(P - 1) - 1) / 2), RoundingMode.DOWN)


def accurate_scaling(Cbar: np.ndarray, e_prime: np.ndarray, P: int, axis: str) -> np.ndarray:
    """Scaling exponents from a bound matrix, evaluated in round-down binary32.

    ``e(mu_i) = e(mu'_i) + floor(P' + delta * log2(max_h cbar_ih))``; rows whose
    bound is zero get exponent 0.
    """
    _check_axis(axis)
    Cbar = np.asarray(Cbar, dtype=np.float32)
    cmax = Cbar.max(axis=_reduce_axis(axis)).astype(np.float64)
    nz = cmax > 0
    Pp = np.float64(log2_offset_base(P))
    L = to_binary32(np.log2(np.where(nz, cmax, 1.0)), RoundingMode.UP).astype(np.float64)
    t = to_binary32(np.float64(DELTA) * L, RoundingMode.DOWN).astype(np.float64)
    s = to_binary32(Pp + t, RoundingMode.DOWN).astype(np.float64)
    off = np.floor(s).astype(np.int64)
    e = np.where(nz, np.asarray(e_prime, dtype=np.int64) + off, 0)
    return _to_int16(e)


def to_integral(M: np.ndarray, exps: np.ndarray, axis: str) -> np.ndarray:
    """``trunc(2**e * M)`` row- or column-wise; exact for finite results."""
    _check_axis(axis)
    M = np.asarray(M, dtype=np.float64)
    scaled = np.ldexp(M, _broadcast(exps, axis))
    if scaled.size and np.abs(scaled).max() >= INTEGRAL_LIMIT:
        raise OverflowError("scaled matrix exceeds 2**970")
    return np.trunc(scaled)


def residues(Aint: np.ndarray, ms: ModuliSet) -> list[Residues]:
    """Symmetric residues of an integral matrix for every modulus of ``ms``."""
    Aint = np.asarray(Aint, dtype=np.float64)
    m, e = _split_integral(Aint)
    out = []
    dtype = np.int8 if ms.scheme is Scheme.INT8 else np.int16
    for p in ms.p:
        r = np.mod(np.mod(m, p) * _pow2_mod(p)[e], p)
        out.append(Residues(p, symmetric_mod(r, p).astype(dtype)))
    return out


def digits(R: Residues, is_square: bool, s: int) -> DigitMatrices:
    """Split residues into FP8-exact digits.

    Square moduli (``p = s*s``): ``D1 = round(r/s)`` with ties to even,
    ``D2 = r - s*D1``. Other moduli use radix 16: ``D1 = sign(r)*ceil(|r|/16)``,
    ``D2 = r - 16*D1`` and ``D3 = D1 + D2``.
    """
    r = np.asarray(R.values, dtype=np.int64)
    if is_square:
        if s * s != R.p or s > 33:
            raise ValueError(f"square digits need p = s*s with s <= 33 (p={R.p}, s={s})")
        if r.size and np.abs(r).max() > R.p // 2:
            raise ValueError("residue outside the symmetric range")
        d1 = np.rint(r / s).astype(np.int64)
        d2 = r - s * d1
        return DigitMatrices(R.p, s, True, fp8_from_int(d1), fp8_from_int(d2))
    if s != 16:
        raise ValueError("non-square FP8 moduli use radix 16")
    if r.size and np.abs(r).max() > 256:
        raise ValueError("Karatsuba digits need |r| <= 256")
    d1 = np.sign(r) * ((np.abs(r) + 15) // 16)
    d2 = r - 16 * d1
    d3 = d1 + d2
    return DigitMatrices(R.p, 16, False, fp8_from_int(d1), fp8_from_int(d2), fp8_from_int(d3))
