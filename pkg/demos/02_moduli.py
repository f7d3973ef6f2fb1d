"""Moduli families, their dynamic range, and what each N buys."""

import math

from ozaki8.models import matmul_count
from ozaki8.moduli import Scheme, build_moduli, effective_bits, greedy_family

for scheme in Scheme:
    fam = [p for p, _, _ in greedy_family(scheme)]
    print(f"{scheme.value:>14}: {fam[:10]} ... ({len(fam)} total)")

print()
print(" N   int8 bits   fp8-hybrid bits   hybrid products (fast/accurate)")
for N in range(8, 19):
    i8 = effective_bits(build_moduli("int8", N))
    f8 = effective_bits(build_moduli("fp8-hybrid", N))
    counts = matmul_count("fp8-ozaki2", "fast", N), matmul_count("fp8-ozaki2", "accurate", N)
    print(f"{N:2d}   {i8:9.2f}   {f8:15.2f}   {counts[0]:3d} / {counts[1]:3d}")

# binary64 carries 53 bits; the smallest N that clears it
for scheme in ("int8", "fp8-karatsuba", "fp8-hybrid"):
    N = next(N for N in range(2, 30) if effective_bits(build_moduli(scheme, N)) >= 53)
    P = build_moduli(scheme, N).P
    print(f"{scheme}: N={N} gives log2(P) = {math.log2(P):.1f}")
