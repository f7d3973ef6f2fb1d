"""Ozaki-II DGEMM emulation over simulated INT8 and FP8 MMA units."""

from __future__ import annotations

import enum
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import quantize as qz
from .lowprec import FP8_MAX_K, INT8_MAX_K, RoundingMode, dyadic_to_float64, fp8_gemm, int8_gemm, to_binary32
from .moduli import N_MAX, CrtPlan, ModuliSet, Scheme, as_scheme, build_moduli
from .quantize import DigitMatrices, Residues

PHASES = ("quant", "gemms", "requant", "dequant", "others")

# |256*C1| <= 2**32 for FP8 digit products, so 64-bit combination never overflows.
_COMBINE_LIMIT = 1 << 62


class Mode(str, enum.Enum):
    FAST = "fast"
    ACCURATE = "accurate"


@dataclass(frozen=True)
class EmulationConfig:
    scheme: Scheme = Scheme.FP8_HYBRID
    mode: Mode = Mode.ACCURATE
    N: int = 12
    m_block: int | None = None
    n_block: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", as_scheme(self.scheme))
        object.__setattr__(self, "mode", Mode(self.mode))
        if not 2 <= self.N <= N_MAX[self.scheme]:
            raise ValueError(f"N={self.N} out of range for {self.scheme.value}")
        for b in (self.m_block, self.n_block):
            if b is not None and b < 1:
                raise ValueError("block sizes must be positive")

    @property
    def moduli(self) -> ModuliSet:
        return build_moduli(self.scheme, self.N)


@dataclass
class PhaseStats:
    """Wall time per phase (simulator time, not GPU time) and call counters."""

    seconds: dict = field(default_factory=lambda: dict.fromkeys(PHASES, 0.0))
    calls: dict = field(default_factory=lambda: dict.fromkeys(PHASES, 0))
    lowprec_gemms: int = 0
    total_seconds: float = 0.0
    range_warning: bool = False

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] += time.perf_counter() - t0
            self.calls[name] += 1

    def merge(self, other: "PhaseStats") -> None:
        for p in PHASES:
            self.seconds[p] += other.seconds[p]
            self.calls[p] += other.calls[p]
        self.lowprec_gemms += other.lowprec_gemms
        self.total_seconds += other.total_seconds
        self.range_warning |= other.range_warning


@dataclass
class EmulationResult:
    C: np.ndarray
    stats: PhaseStats


# -- modular products ---------------------------------------------------------


def _same_modulus(a, b) -> int:
    if a.p != b.p:
        raise ValueError(f"modulus mismatch: {a.p} vs {b.p}")
    return a.p


def _gemm64(X, Y, stats: PhaseStats | None) -> np.ndarray:
    if stats is not None:
        stats.lowprec_gemms += 1
    return fp8_gemm(X, Y).astype(np.int64)


def _square_products(Ad: DigitMatrices, Bd: DigitMatrices, stats=None):
    return (
        _gemm64(Ad.d1, Bd.d2, stats),
        _gemm64(Ad.d2, Bd.d1, stats),
        _gemm64(Ad.d2, Bd.d2, stats),
    )


def _square_reduce(p: int, s: int, C1, C2, C3) -> np.ndarray:
    # The s*s*D1*D1 term is a multiple of p and is dropped.
    return qz.symmetric_mod(s * (C1 + C2) + C3, p).astype(np.int16)


def _karatsuba_products(Ad: DigitMatrices, Bd: DigitMatrices, stats=None):
    return (
        _gemm64(Ad.d1, Bd.d1, stats),
        _gemm64(Ad.d2, Bd.d2, stats),
        _gemm64(Ad.d3, Bd.d3, stats),
    )


def _karatsuba_reduce(p: int, C1, C2, C3) -> np.ndarray:
    full = 256 * C1 + C2 + 16 * (C3 - C1 - C2)
    assert full.size == 0 or np.abs(full).max() < _COMBINE_LIMIT
    return qz.symmetric_mod(full, p).astype(np.int16)


def modprod_int8(Al: Residues, Bl: Residues, stats: PhaseStats | None = None) -> Residues:
    """``mod(A_l B_l, p)`` with one INT8 MMA."""
    p = _same_modulus(Al, Bl)
    if p > 256:
        raise ValueError("INT8 moduli must not exceed 256")
    if stats is not None:
        stats.lowprec_gemms += 1
    C = int8_gemm(Al.values.astype(np.int8), Bl.values.astype(np.int8))
    return Residues(p, qz.symmetric_mod(C.astype(np.int64), p).astype(np.int8))


def modprod_square(Ad: DigitMatrices, Bd: DigitMatrices, stats: PhaseStats | None = None) -> Residues:
    """Residue product for a square modulus from three FP8 products, no Karatsuba."""
    p = _same_modulus(Ad, Bd)
    if not (Ad.square and Bd.square):
        raise ValueError(f"modulus {p} is not a square modulus")
    return Residues(p, _square_reduce(p, Ad.s, *_square_products(Ad, Bd, stats)))


def modprod_karatsuba(Ad: DigitMatrices, Bd: DigitMatrices, stats: PhaseStats | None = None) -> Residues:
    """Residue product for a radix-16 modulus via Karatsuba reconstruction."""
    p = _same_modulus(Ad, Bd)
    if Ad.square or Bd.square:
        raise ValueError(f"modulus {p} is square; use modprod_square")
    return Residues(p, _karatsuba_reduce(p, *_karatsuba_products(Ad, Bd, stats)))


# -- reconstruction -----------------------------------------------------------


def crt_combine(res: list[Residues], plan: CrtPlan) -> np.ndarray:
    """Exact integer matrix congruent to every residue, in the symmetric range of P."""
    if len(res) != len(plan.moduli):
        raise ValueError("need one residue matrix per modulus")
    shape = res[0].shape
    for r, p in zip(res, plan.moduli):
        if r.shape != shape:
            raise ValueError("residue matrices differ in shape")
        if r.p != p:
            raise ValueError(f"residue modulus {r.p} does not match plan modulus {p}")
    acc = np.zeros(shape, dtype=object)
    for r, w in zip(res, plan.weights):
        acc = acc + r.values.astype(np.int64).astype(object) * w
    P = plan.P
    half = (P + 1) // 2
    flat = [v % P for v in acc.ravel()]
    out = np.array([v - P if v >= half else v for v in flat], dtype=object)
    return out.reshape(shape)


def _inverse_scale(Cbig: np.ndarray, e_mu, e_nu):
    e_mu = np.asarray(e_mu, dtype=np.int64)
    e_nu = np.asarray(e_nu, dtype=np.int64)
    m, n = Cbig.shape
    out = np.empty((m, n), dtype=np.float64)
    flagged = False
    for i in range(m):
        row = Cbig[i]
        for j in range(n):
            c = int(row[j])
            v = dyadic_to_float64(c, -int(e_mu[i] + e_nu[j]))
            if c != 0 and (v == 0.0 or not np.isfinite(v) or abs(v) < 2.2250738585072014e-308):
                flagged = True
            out[i, j] = v
    return out, flagged


def inverse_scale(Cbig: np.ndarray, e_mu, e_nu) -> np.ndarray:
    """Round ``C' * 2**-(e(mu_i) + e(nu_j))`` to binary64 (nearest-even)."""
    out, flagged = _inverse_scale(Cbig, e_mu, e_nu)
    if flagged:
        warnings.warn("emulated result over/underflows binary64", RuntimeWarning, stacklevel=2)
    return out


# -- pipelines ----------------------------------------------------------------


def _validate(A: np.ndarray, B: np.ndarray, cfg: EmulationConfig):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ValueError(f"cannot multiply shapes {A.shape} and {B.shape}")
    if not (np.isfinite(A).all() and np.isfinite(B).all()):
        raise ValueError("inputs must be finite")
    kmax = INT8_MAX_K if cfg.scheme is Scheme.INT8 else FP8_MAX_K
    if A.shape[1] > kmax:
        raise ValueError(f"k = {A.shape[1]} exceeds {kmax} for {cfg.scheme.value}")
    return A, B


def _scaling(A, B, cfg: EmulationConfig, P: int, stats: PhaseStats):
    if cfg.mode is Mode.FAST:
        with stats.phase("quant"):
            return qz.fast_scaling(A, "rows", P), qz.fast_scaling(B, "cols", P)
    if cfg.scheme is Scheme.INT8:
        with stats.phase("quant"):
            epA, Abar = qz.accurate_prescale_int8(A, "rows")
            epB, Bbar = qz.accurate_prescale_int8(B, "cols")
        with stats.phase("gemms"):
            stats.lowprec_gemms += 1
            Cbar = to_binary32(int8_gemm(Abar, Bbar).astype(np.float64), RoundingMode.UP)
    else:
        with stats.phase("quant"):
            epA, Abar = qz.accurate_prescale(A, "rows")
            epB, Bbar = qz.accurate_prescale(B, "cols")
        with stats.phase("gemms"):
            stats.lowprec_gemms += 1
            Cbar = qz.bound_matrix(Abar, Bbar)
    with stats.phase("quant"):
        return qz.accurate_scaling(Cbar, epA, P, "rows"), qz.accurate_scaling(Cbar, epB, P, "cols")


def gemm_emulated(A, B, cfg: EmulationConfig) -> EmulationResult:
    """Approximate ``A @ B`` through the Ozaki-II scheme selected by ``cfg``."""
    stats = PhaseStats()
    t0 = time.perf_counter()
    A, B = _validate(A, B, cfg)
    ms = cfg.moduli
    plan = ms.plan

    e_mu, e_nu = _scaling(A, B, cfg, plan.P, stats)
    with stats.phase("quant"):
        Aint = qz.to_integral(A, e_mu, "rows")
        Bint = qz.to_integral(B, e_nu, "cols")
        Ares = qz.residues(Aint, ms)
        Bres = qz.residues(Bint, ms)
        if cfg.scheme is not Scheme.INT8:
            Adig = [qz.digits(r, sq, s) for r, sq, s in zip(Ares, ms.square, ms.s)]
            Bdig = [qz.digits(r, sq, s) for r, sq, s in zip(Bres, ms.square, ms.s)]

    Cres = []
    for ell, p in enumerate(ms.p):
        if cfg.scheme is Scheme.INT8:
            with stats.phase("gemms"):
                stats.lowprec_gemms += 1
                C = int8_gemm(Ares[ell].values, Bres[ell].values)
            with stats.phase("requant"):
                Cres.append(Residues(p, qz.symmetric_mod(C.astype(np.int64), p).astype(np.int8)))
        elif ms.square[ell]:
            with stats.phase("gemms"):
                prods = _square_products(Adig[ell], Bdig[ell], stats)
            with stats.phase("requant"):
                Cres.append(Residues(p, _square_reduce(p, ms.s[ell], *prods)))
        else:
            with stats.phase("gemms"):
                prods = _karatsuba_products(Adig[ell], Bdig[ell], stats)
            with stats.phase("requant"):
                Cres.append(Residues(p, _karatsuba_reduce(p, *prods)))

    with stats.phase("dequant"):
        Cbig = crt_combine(Cres, plan)
        C, flagged = _inverse_scale(Cbig, e_mu, e_nu)
    stats.range_warning = flagged

    stats.total_seconds = time.perf_counter() - t0
    busy = sum(stats.seconds[p] for p in PHASES if p != "others")
    stats.seconds["others"] = max(stats.total_seconds - busy, 0.0)
    stats.calls["others"] = 1
    return EmulationResult(C, stats)


def gemm_blocked(A, B, cfg: EmulationConfig) -> EmulationResult:
    """Run the emulation on row/column blocks of the output; k is never split."""
    A, B = _validate(A, B, cfg)
    m, n = A.shape[0], B.shape[1]
    mb = cfg.m_block or max(m, 1)
    nb = cfg.n_block or max(n, 1)
    C = np.empty((m, n), dtype=np.float64)
    stats = PhaseStats()
    for i0 in range(0, m, mb):
        for j0 in range(0, n, nb):
            r = gemm_emulated(A[i0 : i0 + mb], B[:, j0 : j0 + nb], cfg)
            C[i0 : i0 + mb, j0 : j0 + nb] = r.C
            stats.merge(r.stats)
    return EmulationResult(C, stats)


def dgemm(A, B, scheme="fp8-hybrid", mode="accurate", N: int = 12, m_block=None, n_block=None) -> np.ndarray:
    """Convenience wrapper returning only the emulated product."""
    cfg = EmulationConfig(scheme, mode, N, m_block, n_block)
    if m_block or n_block:
        return gemm_blocked(A, B, cfg).C
    return gemm_emulated(A, B, cfg).C
