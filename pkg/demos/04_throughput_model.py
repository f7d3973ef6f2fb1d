"""Predicted throughput of the emulation on a hypothetical accelerator."""

import numpy as np

from ozaki8.models import HardwareProfile, ModelQuery, correction_from_matmuls, throughput, workspace

dims = (16384, 16384, 16384)
ops = np.array([1e15, 2e15, 3e15, 5e15])
bws = np.array([2e12, 4e12, 7.7e12, 1.2e13])

for scheme, mode, N in (("int8", "fast", 16), ("fp8-hybrid", "accurate", 12)):
    q = ModelQuery(*dims, N, scheme, mode)
    c = correction_from_matmuls(q)
    print(f"{scheme} {mode} N={N} (c={c}), TFLOP/s")
    print("   ops \\ b " + "".join(f"{b / 1e12:9.1f}" for b in bws))
    for o in ops:
        cells = [throughput(q, HardwareProfile(o, b, c)) / 1e12 for b in bws]
        print(f"   {o / 1e15:5.1f}e15 " + "".join(f"{x:9.1f}" for x in cells))

    # charging every FP8 product instead of one per modulus
    if scheme != "int8":
        alt = throughput(q, HardwareProfile(3e15, 7.7e12, c), all_products=True) / 1e12
        print(f"   all products charged at (3e15, 7.7e12): {alt:.1f}")

print("workspace int8 N=14:", workspace("int8", *dims, 14) / 1e9, "GB")
print("workspace fp8-hybrid N=12:", workspace("fp8-hybrid", *dims, 12) / 1e9, "GB")
