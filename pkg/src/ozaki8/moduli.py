"""Pairwise-coprime moduli families and CRT constants."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence


class Scheme(str, enum.Enum):
    INT8 = "int8"
    FP8_KARATSUBA = "fp8-karatsuba"
    FP8_HYBRID = "fp8-hybrid"


# Square moduli tried first by the hybrid family, as (modulus, radix).
HYBRID_SQUARES = ((1089, 33), (1024, 32), (961, 31), (841, 29), (625, 25), (529, 23))

_START = {Scheme.INT8: 256, Scheme.FP8_KARATSUBA: 513, Scheme.FP8_HYBRID: 513}
N_MAX = {Scheme.INT8: 29, Scheme.FP8_KARATSUBA: 29, Scheme.FP8_HYBRID: 33}
N_MIN = 2


def as_scheme(scheme) -> Scheme:
    return scheme if isinstance(scheme, Scheme) else Scheme(scheme)


@lru_cache(maxsize=None)
def greedy_family(scheme) -> tuple[tuple[int, bool, int | None], ...]:
    """Full greedy list of ``(p, is_square, radix)`` down to 2.

    Candidates are scanned in descending order and kept when coprime to every
    modulus kept so far.
    """
    scheme = as_scheme(scheme)
    kept: list[tuple[int, bool, int | None]] = []

    def coprime(c: int) -> bool:
        return all(math.gcd(c, p) == 1 for p, _, _ in kept)

    if scheme is Scheme.FP8_HYBRID:
        for p, s in HYBRID_SQUARES:
            if coprime(p):
                kept.append((p, True, s))
    radix = None if scheme is Scheme.INT8 else 16
    for c in range(_START[scheme], 1, -1):
        if coprime(c):
            kept.append((c, False, radix))
    return tuple(kept)


@dataclass(frozen=True)
class CrtPlan:
    P: int
    weights: tuple[int, ...]
    moduli: tuple[int, ...]


@dataclass(frozen=True)
class ModuliSet:
    scheme: Scheme
    p: tuple[int, ...]
    square: tuple[bool, ...]
    s: tuple[int | None, ...]

    def __post_init__(self):
        if not (len(self.p) == len(self.square) == len(self.s)):
            raise ValueError("moduli, square flags and radices must have equal length")
        for i, a in enumerate(self.p):
            for b in self.p[i + 1 :]:
                if math.gcd(a, b) != 1:
                    raise ValueError(f"moduli {a} and {b} are not coprime")

    @property
    def N(self) -> int:
        return len(self.p)

    @cached_property
    def P(self) -> int:
        return math.prod(self.p)

    @cached_property
    def plan(self) -> CrtPlan:
        return crt_constants(self)


def build_moduli(scheme, N: int) -> ModuliSet:
    """First ``N`` moduli of the greedy family for ``scheme``."""
    scheme = as_scheme(scheme)
    if not N_MIN <= N <= N_MAX[scheme]:
        raise ValueError(f"N must lie in [{N_MIN}, {N_MAX[scheme]}] for {scheme.value}, got {N}")
    fam = greedy_family(scheme)[:N]
    return ModuliSet(
        scheme=scheme,
        p=tuple(f[0] for f in fam),
        square=tuple(f[1] for f in fam),
        s=tuple(f[2] for f in fam),
    )


def crt_constants(ms: ModuliSet | Sequence[int]) -> CrtPlan:
    """P and the CRT weights ``w_l = q_l * P / p_l`` with ``w_l = 1 (mod p_l)``."""
    moduli = tuple(ms.p) if isinstance(ms, ModuliSet) else tuple(int(p) for p in ms)
    P = math.prod(moduli)
    weights = []
    for p in moduli:
        cofactor = P // p
        q = pow(cofactor % p, -1, p) if p > 1 else 0
        weights.append(q * cofactor)
    return CrtPlan(P=P, weights=tuple(weights), moduli=moduli)


def log2_int(x: int) -> float:
    """log2 of a positive integer of any size, to binary64 accuracy."""
    if x <= 0:
        raise ValueError("log2 of a non-positive integer")
    shift = max(x.bit_length() - 64, 0)
    return shift + math.log2(x >> shift) if shift else math.log2(x)


def effective_bits(ms: ModuliSet | int) -> float:
    """log2(sqrt(P/2)): the fixed-point width each operand can carry."""
    P = ms if isinstance(ms, int) else ms.P
    return 0.5 * (log2_int(P) - 1.0)
