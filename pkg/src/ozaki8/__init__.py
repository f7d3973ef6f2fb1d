"""DGEMM emulation with the Ozaki-II scheme on simulated INT8 and FP8 MMA units."""

from .emulate import EmulationConfig, EmulationResult, Mode, PhaseStats, dgemm, gemm_blocked, gemm_emulated
from .lowprec import RoundingMode, fp8_decode, fp8_encode, fp8_gemm, int8_gemm
from .moduli import CrtPlan, ModuliSet, Scheme, build_moduli, crt_constants, effective_bits
from .oracle import ErrorStats, ExactMatrix, error_stats, exact_gemm, gen_matrix

__all__ = [
    "CrtPlan",
    "EmulationConfig",
    "EmulationResult",
    "ErrorStats",
    "ExactMatrix",
    "Mode",
    "ModuliSet",
    "PhaseStats",
    "RoundingMode",
    "Scheme",
    "build_moduli",
    "crt_constants",
    "dgemm",
    "effective_bits",
    "error_stats",
    "exact_gemm",
    "fp8_decode",
    "fp8_encode",
    "fp8_gemm",
    "gemm_blocked",
    "gemm_emulated",
    "gen_matrix",
    "int8_gemm",
]
