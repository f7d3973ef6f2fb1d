"""Emulated DGEMM accuracy against an exact reference, across schemes and inputs."""

import numpy as np

from ozaki8 import dgemm
from ozaki8.emulate import EmulationConfig, gemm_emulated
from ozaki8.oracle import error_stats, exact_gemm, gen_matrix, sequential_gemm_f64

m, n, k = 64, 64, 1024
for phi in (0.0, 1.0, 2.0):
    A = gen_matrix(m, k, phi, 1)
    B = gen_matrix(k, n, phi, 2)
    ref = exact_gemm(A, B)
    base = error_stats(sequential_gemm_f64(A, B), ref).max_rel
    print(f"phi={phi}: binary64 loop max_rel {base:.2e}")
    for scheme, N in (("int8", 14), ("int8", 16), ("fp8-hybrid", 12), ("fp8-hybrid", 14)):
        row = []
        for mode in ("fast", "accurate"):
            s = error_stats(gemm_emulated(A, B, EmulationConfig(scheme, mode, N)).C, ref)
            row.append(f"{mode} {s.max_rel:.2e}")
        print(f"   {scheme:>10} N={N:2d}: " + ", ".join(row))

# where the time goes, per phase
A, B = gen_matrix(256, 512, 0.5, 3), gen_matrix(512, 256, 0.5, 4)
r = gemm_emulated(A, B, EmulationConfig("fp8-hybrid", "accurate", 12))
print("low-precision products:", r.stats.lowprec_gemms)
for phase, sec in r.stats.seconds.items():
    print(f"   {phase:>8}: {sec * 1e3:7.1f} ms")

# integers are reproduced bit for bit
X = np.arange(-8, 8, dtype=float).reshape(4, 4) * 2**19
print("integer product exact:", np.array_equal(dgemm(X, X.T), X @ X.T))
