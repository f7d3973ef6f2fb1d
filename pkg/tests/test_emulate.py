import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ozaki8 import quantize as qz
from ozaki8.emulate import (
    PHASES,
    EmulationConfig,
    crt_combine,
    dgemm,
    gemm_blocked,
    gemm_emulated,
    inverse_scale,
    modprod_int8,
    modprod_karatsuba,
    modprod_square,
)
from ozaki8.lowprec import fp8_encode
from ozaki8.moduli import build_moduli, crt_constants
from ozaki8.oracle import error_stats, exact_gemm, gen_matrix, gen_normal, sequential_gemm_f64

HYBRID = build_moduli("fp8-hybrid", 33)
INT8 = build_moduli("int8", 29)


def sym(x, p):
    r = x % p
    return r - p if r >= (p + 1) // 2 else r


def brute_mod_product(a, b, p):
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            out[i, j] = sym(sum(int(a[i, h]) * int(b[h, j]) for h in range(a.shape[1])), p)
    return out


def res(p, vals, dtype=np.int16):
    return qz.Residues(p, np.asarray(vals, dtype=dtype))


def digits_for(p, vals):
    i = HYBRID.p.index(p)
    return qz.digits(res(p, vals), HYBRID.square[i], HYBRID.s[i])


def test_modprod_int8_examples():
    assert modprod_int8(res(7, [[3]], np.int8), res(7, [[3]], np.int8)).values[0, 0] == 2
    m = res(256, [[-128]], np.int8)
    assert modprod_int8(m, m).values[0, 0] == 0
    rng = np.random.default_rng(0)
    a = qz.symmetric_mod(rng.integers(0, 251, (8, 8)), 251)
    b = qz.symmetric_mod(rng.integers(0, 251, (8, 8)), 251)
    got = modprod_int8(res(251, a, np.int8), res(251, b, np.int8)).values
    np.testing.assert_array_equal(got, brute_mod_product(a, b, 251))


def test_modprod_square_examples():
    d = digits_for(1089, [[544]])
    dT = digits_for(1089, [[544]])
    assert modprod_square(d, dT).values[0, 0] == -272 == sym(544 * 544, 1089)
    # The reduction drops the s**2 * D1 D1 term: 33*(16*16 + 16*16) + 16*16 = 17152.
    assert sym(33 * (16 * 16 + 16 * 16) + 16 * 16, 1089) == -272
    z = digits_for(1089, np.zeros((2, 3)))
    assert not modprod_square(z, digits_for(1089, np.zeros((3, 2)))).values.any()
    rng = np.random.default_rng(1)
    a = qz.symmetric_mod(rng.integers(0, 1024, (4, 16)), 1024)
    b = qz.symmetric_mod(rng.integers(0, 1024, (16, 4)), 1024)
    got = modprod_square(digits_for(1024, a), digits_for(1024, b)).values
    np.testing.assert_array_equal(got, brute_mod_product(a, b, 1024))


def test_modprod_karatsuba_examples():
    d = digits_for(511, [[200]])
    assert modprod_karatsuba(d, d).values[0, 0] == 142 == sym(40000, 511)
    assert 256 * 169 + 64 + 16 * (25 - 169 - 64) == 40000
    z = digits_for(511, [[0]])
    assert modprod_karatsuba(z, z).values[0, 0] == 0
    rng = np.random.default_rng(2)
    a = qz.symmetric_mod(rng.integers(0, 509, (4, 32)), 509)
    b = qz.symmetric_mod(rng.integers(0, 509, (32, 4)), 509)
    got = modprod_karatsuba(digits_for(509, a), digits_for(509, b)).values
    np.testing.assert_array_equal(got, brute_mod_product(a, b, 509))


def test_modprod_errors():
    with pytest.raises(ValueError):
        modprod_int8(res(7, [[1]], np.int8), res(5, [[1]], np.int8))
    with pytest.raises(ValueError):
        modprod_square(digits_for(511, [[1]]), digits_for(511, [[1]]))
    with pytest.raises(ValueError):
        modprod_karatsuba(digits_for(1089, [[1]]), digits_for(1089, [[1]]))
    with pytest.raises(ValueError):
        modprod_square(digits_for(1089, [[1]]), digits_for(1024, [[1]]))


@settings(max_examples=100, deadline=None)
@given(
    st.integers(0, 2**32),
    st.integers(0, HYBRID.N - 1),
    st.integers(1, 8),
    st.integers(1, 8),
    st.integers(1, 512),
)
def test_modprod_fp8_equivalence(seed, idx, m, n, k):
    rng = np.random.default_rng(seed)
    p = HYBRID.p[idx]
    a = qz.symmetric_mod(rng.integers(0, p, (m, k)), p)
    b = qz.symmetric_mod(rng.integers(0, p, (k, n)), p)
    fn = modprod_square if HYBRID.square[idx] else modprod_karatsuba
    got = fn(digits_for(p, a), digits_for(p, b)).values
    ref = qz.symmetric_mod(a.astype(object).dot(b.astype(object)).astype(np.int64), p)
    np.testing.assert_array_equal(got, ref)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, INT8.N - 1), st.integers(1, 8), st.integers(1, 8), st.integers(1, 512))
def test_modprod_int8_equivalence(seed, idx, m, n, k):
    rng = np.random.default_rng(seed)
    p = INT8.p[idx]
    a = qz.symmetric_mod(rng.integers(0, p, (m, k)), p)
    b = qz.symmetric_mod(rng.integers(0, p, (k, n)), p)
    got = modprod_int8(res(p, a, np.int8), res(p, b, np.int8)).values
    ref = qz.symmetric_mod(a.astype(object).dot(b.astype(object)).astype(np.int64), p)
    np.testing.assert_array_equal(got, ref)


def test_crt_examples():
    plan = crt_constants([256, 255])
    out = crt_combine([res(256, [[100]]), res(255, [[3]])], plan)
    brute = [x for x in range(-32640, 32640) if x % 256 == 100 and x % 255 == 3]
    assert brute == [-24732] and out[0, 0] == -24732
    ms = build_moduli("fp8-hybrid", 12)
    zero = crt_combine([res(p, [[0, 0]]) for p in ms.p], ms.plan)
    assert zero.tolist() == [[0, 0]]
    x = 123456789
    out = crt_combine([res(p, [[sym(x, p)]]) for p in ms.p], ms.plan)
    assert out[0, 0] == x


def test_crt_errors():
    ms = build_moduli("int8", 3)
    with pytest.raises(ValueError):
        crt_combine([res(256, [[0]])], ms.plan)
    with pytest.raises(ValueError):
        crt_combine([res(256, [[0]]), res(255, [[0, 1]]), res(253, [[0]])], ms.plan)
    with pytest.raises(ValueError):
        crt_combine([res(256, [[0]]), res(7, [[0]]), res(253, [[0]])], ms.plan)


@settings(max_examples=50, deadline=None)
@given(st.data(), st.sampled_from([("int8", 14), ("fp8-hybrid", 12), ("fp8-karatsuba", 13)]))
def test_crt_round_trip(data, cfg):
    ms = build_moduli(*cfg)
    P = ms.P
    xs = data.draw(st.lists(st.integers(-(P // 2), (P + 1) // 2 - 1), min_size=1, max_size=6))
    out = crt_combine([res(p, [[sym(x, p) for x in xs]], np.int64) for p in ms.p], ms.plan)
    assert out[0].tolist() == xs


def test_inverse_scale_examples():
    assert inverse_scale(np.array([[3]], dtype=object), [1], [2])[0, 0] == 0.375
    C = np.array([[2**53 + 1, 0]], dtype=object)
    assert inverse_scale(C, [0], [0, 0]).tolist() == [[9007199254740992.0, 0.0]]
    with pytest.warns(RuntimeWarning):
        inverse_scale(np.array([[1]], dtype=object), [-1100], [0])
    with pytest.warns(RuntimeWarning):
        inverse_scale(np.array([[1]], dtype=object), [1100], [0])


def test_identity():
    for scheme, mode, N in [("fp8-hybrid", "accurate", 12), ("fp8-hybrid", "fast", 2), ("int8", "fast", 14)]:
        I = np.eye(7)
        np.testing.assert_array_equal(dgemm(I, I, scheme, mode, N), I)


@pytest.mark.parametrize("seed", range(5))
def test_integer_inputs_exact(seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(-(2**20), 2**20 + 1, (16, 64))
    B = rng.integers(-(2**20), 2**20 + 1, (64, 16))
    C = gemm_emulated(A.astype(float), B.astype(float), EmulationConfig("fp8-hybrid", "accurate", 12)).C
    ref = A.astype(object).dot(B.astype(object))
    assert all(float(r) == c for r, c in zip(ref.ravel(), C.ravel()))


@pytest.mark.parametrize(
    "scheme,mode,N,count",
    [
        ("fp8-hybrid", "accurate", 12, 37),
        ("fp8-hybrid", "fast", 12, 36),
        ("fp8-hybrid", "fast", 4, 12),
        ("int8", "accurate", 14, 15),
        ("int8", "fast", 16, 16),
        ("fp8-karatsuba", "accurate", 13, 40),
    ],
)
def test_lowprec_call_counts(scheme, mode, N, count):
    A = gen_normal(4, 20, 0)
    res_ = gemm_emulated(A, A.T.copy(), EmulationConfig(scheme, mode, N))
    assert res_.stats.lowprec_gemms == count


def test_phase_partition():
    A = gen_normal(16, 64, 3)
    st_ = gemm_emulated(A, A.T.copy(), EmulationConfig()).stats
    assert set(st_.seconds) == set(PHASES)
    assert math.isclose(sum(st_.seconds.values()), st_.total_seconds, rel_tol=1e-9, abs_tol=1e-9)
    assert all(v >= 0 for v in st_.seconds.values())


def test_determinism():
    A = gen_matrix(12, 100, 1.0, 4)
    B = gen_matrix(100, 9, 1.0, 5)
    for cfg in [EmulationConfig(), EmulationConfig("int8", "fast", 15)]:
        C1, C2 = gemm_emulated(A, B, cfg).C, gemm_emulated(A, B, cfg).C
        assert C1.tobytes() == C2.tobytes()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.floats(0, 3), st.sampled_from([("fp8-hybrid", 12), ("fp8-hybrid", 6), ("int8", 14)]))
def test_accurate_scaling_certifies_bound(seed, phi, cfg):
    scheme, N = cfg
    ms = build_moduli(scheme, N)
    A = gen_matrix(6, 50, phi, seed)
    B = gen_matrix(50, 5, phi, seed + 1)
    if scheme == "int8":
        ea, Ab = qz.accurate_prescale_int8(A, "rows")
        eb, Bb = qz.accurate_prescale_int8(B, "cols")
        Cb = (Ab.astype(np.int64) @ Bb.astype(np.int64)).astype(np.float32)
    else:
        ea, Ab = qz.accurate_prescale(A, "rows")
        eb, Bb = qz.accurate_prescale(B, "cols")
        Cb = qz.bound_matrix(Ab, Bb)
    mu = qz.accurate_scaling(Cb, ea, ms.P, "rows")
    nu = qz.accurate_scaling(Cb, eb, ms.P, "cols")
    toint = np.vectorize(int, otypes=[object])
    Ai = toint(qz.to_integral(A, mu, "rows"))
    Bi = toint(qz.to_integral(B, nu, "cols"))
    assert 2 * max(np.dot(np.abs(Ai), np.abs(Bi)).ravel()) < ms.P


def test_accuracy_vs_binary64():
    A = gen_normal(64, 1024, 11)
    B = gen_normal(1024, 64, 12)
    ref = exact_gemm(A, B)
    base = error_stats(sequential_gemm_f64(A, B), ref).max_rel
    got = error_stats(gemm_emulated(A, B, EmulationConfig()).C, ref).max_rel
    assert got <= 8 * base


def test_blocked():
    A = gen_matrix(64, 40, 0.5, 1)
    B = gen_matrix(40, 64, 0.5, 2)
    cfg = EmulationConfig("fp8-hybrid", "accurate", 12)
    whole = gemm_emulated(A, B, cfg).C
    big = gemm_blocked(A, B, EmulationConfig("fp8-hybrid", "accurate", 12, 100, 100)).C
    assert big.tobytes() == whole.tobytes()
    blk = gemm_blocked(A, B, EmulationConfig("fp8-hybrid", "accurate", 12, 32, 32))
    for i in (0, 32):
        for j in (0, 32):
            sub = gemm_emulated(A[i : i + 32], B[:, j : j + 32], cfg).C
            assert blk.C[i : i + 32, j : j + 32].tobytes() == sub.tobytes()
    assert blk.stats.lowprec_gemms == 4 * 37
    ref = exact_gemm(A, B)
    base = error_stats(sequential_gemm_f64(A, B), ref).max_rel
    assert error_stats(blk.C, ref).max_rel <= 8 * base
    assert error_stats(whole, ref).max_rel <= 8 * base


def test_blocked_ragged():
    A = gen_normal(10, 30, 1)
    B = gen_normal(30, 7, 2)
    C = gemm_blocked(A, B, EmulationConfig("int8", "fast", 15, 4, 3)).C
    ref = exact_gemm(A, B).to_float64()
    np.testing.assert_allclose(C, ref, rtol=1e-12, atol=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        EmulationConfig("fp8-hybrid", "accurate", 34)
    with pytest.raises(ValueError):
        EmulationConfig("int8", "medium", 14)
    with pytest.raises(ValueError):
        EmulationConfig("int8", "fast", 14, m_block=0)


def test_input_validation():
    cfg = EmulationConfig()
    with pytest.raises(ValueError):
        gemm_emulated(np.array([[np.inf]]), np.ones((1, 1)), cfg)
    with pytest.raises(ValueError):
        gemm_emulated(np.ones((2, 3)), np.ones((2, 3)), cfg)
    with pytest.raises(ValueError):
        gemm_emulated(np.ones((1, (1 << 16) + 1)), np.ones(((1 << 16) + 1, 1)), cfg)


def test_zero_rows_and_columns():
    A = gen_normal(5, 8, 0)
    A[2] = 0
    B = gen_normal(8, 4, 1)
    B[:, 1] = 0
    for cfg in [EmulationConfig(), EmulationConfig("int8", "accurate", 15), EmulationConfig("int8", "fast", 15)]:
        C = gemm_emulated(A, B, cfg).C
        assert not C[2].any() and not C[:, 1].any()


def test_range_warning_flag():
    A = np.array([[1e300]])
    r = gemm_emulated(A, A, EmulationConfig("int8", "fast", 14))
    assert r.stats.range_warning and np.isinf(r.C[0, 0])
    assert not gemm_emulated(np.eye(2), np.eye(2), EmulationConfig()).stats.range_warning


def test_fp8_digits_used_are_exact_codes():
    # Residues of every hybrid modulus feed exact FP8 integers.
    ms = build_moduli("fp8-hybrid", 14)
    A = qz.to_integral(gen_normal(3, 5, 0), np.full(3, 40), "rows")
    for r, sq, s in zip(qz.residues(A, ms), ms.square, ms.s):
        d = qz.digits(r, sq, s)
        assert set(np.unique(d.d1)).issubset(set(fp8_encode(np.arange(-16.0, 17.0)).tolist()))
