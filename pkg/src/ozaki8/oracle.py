"""Exact reference products, error metrics and the random test-matrix generator."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lowprec import dyadic_to_float64

_LIMB_BITS = 16


@dataclass(frozen=True)
class ExactMatrix:
    """Entries ``num[i, j] * 2**exp`` held exactly (``num`` is an object array of ints)."""

    num: np.ndarray
    exp: int

    @property
    def shape(self):
        return self.num.shape

    def to_float64(self) -> np.ndarray:
        out = np.empty(self.shape, dtype=np.float64)
        for idx, v in np.ndenumerate(self.num):
            out[idx] = dyadic_to_float64(int(v), self.exp)
        return out

    def to_integers(self) -> np.ndarray:
        """Object array of exact integers; raises if any entry is fractional."""
        if self.exp >= 0:
            return self.num * (1 << self.exp) if self.exp else self.num.copy()
        d = 1 << -self.exp
        out = np.empty(self.shape, dtype=object)
        for idx, v in np.ndenumerate(self.num):
            q, r = divmod(int(v), d)
            if r:
                raise ValueError("entry is not an integer")
            out[idx] = q
        return out

    def fraction(self, i: int, j: int) -> Fraction:
        return Fraction(int(self.num[i, j])) * Fraction(2) ** self.exp


@dataclass(frozen=True)
class ErrorStats:
    max_rel: float
    median_rel: float
    max_abs: float


def _significands(M: np.ndarray, axis: int):
    """Integer significands and binary exponents with one exponent per row (axis=1) or column (axis=0)."""
    f, E = np.frexp(M)
    mant = np.ldexp(f, 53).astype(np.int64)
    ex = E.astype(np.int64) - 53
    nz = mant != 0
    big = np.iinfo(np.int64).max
    emin = np.where(nz, ex, big).min(axis=axis, keepdims=True)
    emin = np.where(emin == big, 0, emin)
    shift = np.where(nz, ex - emin, 0)
    return mant, shift, emin.ravel()


def _limbs(mant: np.ndarray, shift: np.ndarray) -> list[np.ndarray]:
    """Signed radix-2**16 limbs of ``mant << shift`` (vectorised, exact)."""
    mag = np.abs(mant)
    sign = np.sign(mant)
    width = 53 + (int(shift.max()) if shift.size else 0)
    count = -(-width // _LIMB_BITS)
    mask = (1 << _LIMB_BITS) - 1
    out = []
    for t in range(count):
        lo = _LIMB_BITS * t - shift
        right = np.clip(lo, 0, 63)
        left = np.clip(-lo, 0, 63)
        # Left shifts may wrap in int64; only the masked low bits are kept.
        piece = np.where(lo >= 0, mag >> right, (mag << left) & mask) & mask
        piece = np.where((lo >= 53) | (lo <= -_LIMB_BITS), 0, piece)
        out.append(piece * sign)
    return out


def _limb_product(mA, sA, mB, sB) -> np.ndarray:
    LA = _limbs(mA, sA)
    LB = _limbs(mB, sB)
    k = mA.shape[1]
    # Limb products stay below 2**32, so sums are exact in binary64 for k < 2**21.
    if k >= 1 << (53 - 2 * _LIMB_BITS):
        raise ValueError("k too large for the limb oracle")
    acc = np.zeros((mA.shape[0], mB.shape[1]), dtype=object)
    diag: dict[int, np.ndarray] = {}
    LA = [X.astype(np.float64) for X in LA]
    LB = [Y.astype(np.float64) for Y in LB]
    for s, X in enumerate(LA):
        for t, Y in enumerate(LB):
            Z = (X @ Y).astype(np.int64).astype(object)
            diag[s + t] = diag[s + t] + Z if s + t in diag else Z
    for d, Z in diag.items():
        acc = acc + Z * (1 << (_LIMB_BITS * d))
    return acc


def exact_gemm(A, B) -> ExactMatrix:
    """Exact product of two binary64 matrices as dyadic rationals."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ValueError(f"cannot multiply shapes {A.shape} and {B.shape}")
    if not (np.isfinite(A).all() and np.isfinite(B).all()):
        raise ValueError("exact_gemm needs finite inputs")
    mA, sA, eA = _significands(A, axis=1)
    mB, sB, eB = _significands(B, axis=0)
    raw = _limb_product(mA, sA, mB, sB)
    m, n = raw.shape
    if m == 0 or n == 0:
        return ExactMatrix(raw, 0)
    base_a, base_b = int(eA.min()), int(eB.min())
    num = np.empty((m, n), dtype=object)
    for i in range(m):
        da = int(eA[i]) - base_a
        for j in range(n):
            num[i, j] = int(raw[i, j]) << (da + int(eB[j]) - base_b)
    return ExactMatrix(num, base_a + base_b)


def exact_int_gemm(A, B) -> np.ndarray:
    """Exact integer product as an object array of Python ints."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.dtype == object or B.dtype == object:
        return np.dot(A.astype(object), B.astype(object))
    return exact_gemm(A.astype(np.float64), B.astype(np.float64)).to_integers()


def sequential_gemm_f64(A, B) -> np.ndarray:
    """Plain triple-loop binary64 GEMM: one rounded multiply and add per step."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    acc = np.zeros((A.shape[0], B.shape[1]), dtype=np.float64)
    for h in range(A.shape[1]):
        acc = acc + np.multiply.outer(A[:, h], B[h, :])
    return acc


def relative_errors(C, ref: ExactMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-entry relative error (absolute error where the exact value is 0) and absolute error."""
    C = np.asarray(C, dtype=np.float64)
    if C.shape != ref.shape:
        raise ValueError(f"shape mismatch: {C.shape} vs {ref.shape}")
    scale = Fraction(2) ** ref.exp
    rel = np.empty(C.shape, dtype=np.float64)
    ab = np.empty(C.shape, dtype=np.float64)
    for idx, v in np.ndenumerate(ref.num):
        exact = int(v) * scale
        c = C[idx]
        if not np.isfinite(c):
            rel[idx] = ab[idx] = np.inf
            continue
        diff = abs(Fraction(c) - exact)
        ab[idx] = float(diff)
        rel[idx] = float(diff / abs(exact)) if exact else float(diff)
    return rel, ab


def error_stats(C, ref: ExactMatrix) -> ErrorStats:
    rel, ab = relative_errors(C, ref)
    if rel.size == 0:
        return ErrorStats(0.0, 0.0, 0.0)
    return ErrorStats(float(rel.max()), float(np.median(rel)), float(ab.max()))


def _uniform_open_closed(bitgen: np.random.PCG64, count: int) -> np.ndarray:
    raw = bitgen.random_raw(count).astype(np.uint64)
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def _box_muller(bitgen: np.random.PCG64, count: int) -> np.ndarray:
    pairs = (count + 1) // 2
    u1 = _uniform_open_closed(bitgen, pairs)
    u2 = _uniform_open_closed(bitgen, pairs)
    r = np.sqrt(-2.0 * np.log(u1))
    g = np.empty(2 * pairs, dtype=np.float64)
    g[0::2] = r * np.cos(2.0 * np.pi * u2)
    g[1::2] = r * np.sin(2.0 * np.pi * u2)
    return g[:count]


def gen_matrix(m: int, k: int, phi: float, seed: int) -> np.ndarray:
    """``(u - 0.5) * exp(g * phi)`` test matrix, fully determined by ``seed``.

    The stream comes from numpy's PCG64 bit generator: ``m*k`` draws give the
    uniforms ``u`` in (0, 1] (row-major), then pairs of further draws feed a
    Box-Muller transform for the standard normals ``g``.
    """
    if phi < 0:
        raise ValueError("phi must be non-negative")
    bitgen = np.random.PCG64(seed)
    u = _uniform_open_closed(bitgen, m * k)
    g = _box_muller(bitgen, m * k)
    return ((u - 0.5) * np.exp(g * phi)).reshape(m, k)


def gen_normal(m: int, k: int, seed: int) -> np.ndarray:
    """Standard-normal matrix from the same Box-Muller stream."""
    return _box_muller(np.random.PCG64(seed), m * k).reshape(m, k)
