"""Walk through the simulated FP8 E4M3 format and the FP8 MMA unit."""

import numpy as np

from ozaki8.lowprec import RoundingMode, fp8_decode, fp8_encode, fp8_gemm

# all 254 finite codes, decoded
codes = np.array([c for c in range(256) if c not in (0x7F, 0xFF)], dtype=np.uint8)
vals = fp8_decode(codes)
print("finite values:", len(vals), "max:", vals.max(), "smallest subnormal:", vals[vals > 0].min())

# every integer up to 16 survives the round trip, 17 does not
ints = np.arange(-17, 18, dtype=float)
back = fp8_decode(fp8_encode(ints))
print("exact integers:", ints[back == ints].min(), "..", ints[back == ints].max())
print("17 ->", fp8_decode(fp8_encode(17.0)), "(ties go to even)")

# directed rounding brackets the input
x = np.float64(np.pi)
for mode in RoundingMode:
    print(f"pi rounded {mode.value:>7}:", fp8_decode(fp8_encode(x, mode)))
print("overflow saturates:", fp8_decode(fp8_encode(1e6)))

# digit-sized products accumulate exactly in binary32 up to k = 2**16
rng = np.random.default_rng(1)
a = rng.integers(-16, 17, size=(3, 4096))
b = rng.integers(-16, 17, size=(4096, 3))
C = fp8_gemm(fp8_encode(a.astype(float)), fp8_encode(b.astype(float)))
print("fp8_gemm exact on digits:", np.array_equal(C.astype(np.int64), a @ b))
