"""Spectral-bound verification and stable-rank sweeps.

Two jobs. First, check a two-sided bound relating a matrix's stable rank to
the stable rank of its quantized form: with e the quantization residual and
s = sigma_max(original),

    (1/2) * (sqrt(SR) - ||e||_F / s)  <=  sqrt(SR(quantized))
                                      <=  2 * (sqrt(SR) + ||e||_F / s).

The bound's hypotheses are flagged separately from whether the inequality
held, so sampling studies can report both. Second, generate sweep grids
showing how the sine reconstruction's stable rank responds to frequency and
to quantization depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .adapter import default_gamma
from .errors import InputError
from .linalg import as_matrix, frobenius_norm, sigma_max, sigma_min, stable_rank
from .quantize import MAX_BITS, dequantize, quantize_matrix

CSV_HEADER = "rank,omega,bits,sr_plain,sr_quantized,sr_sine,sr_sine_quantized,seed"
FACTOR_SCALE_DOC = "factor entries are N(0, 1/rank) so products stay O(1) across ranks"


@dataclass(frozen=True)
class TheoremCheck:
    """One evaluation of the quantization stable-rank bound.

    ``preconditions_met`` reflects the hypotheses under which the bound is
    guaranteed: sigma_min(original) <= 1, sigma_max(error) >= 1, and
    sigma_max(original) >= 2 * sigma_max(error). ``holds`` reports the
    inequality itself, which is evaluated regardless.
    """

    sr_original: float
    sr_quantized: float
    error_frob: float
    sigma_max_original: float
    sigma_max_error: float
    lower_bound: float
    upper_bound: float
    preconditions_met: bool
    holds: bool


@dataclass(frozen=True)
class SweepPoint:
    """Stable ranks of one (rank, omega, bits, seed) cell.

    ``bits`` is None for the unquantized baseline, where the quantized
    columns simply repeat the clean ones.
    """

    rank: int
    omega: float
    bits: int | None
    sr_plain: float
    sr_quantized: float
    sr_sine: float
    sr_sine_quantized: float
    seed: int

    def __post_init__(self):
        for field in ("sr_plain", "sr_quantized", "sr_sine", "sr_sine_quantized"):
            if getattr(self, field) < 1.0:
                raise InputError(f"{field} must be >= 1, got {getattr(self, field)!r}")


def check_theorem(a, bits: int) -> TheoremCheck:
    """Quantize ``a`` at ``bits`` and evaluate the stable-rank bound."""
    original = as_matrix(a, "matrix")
    quantized = dequantize(quantize_matrix(original, bits))
    error = quantized - original

    sr_orig = stable_rank(original)
    sr_quant = stable_rank(quantized)
    s_orig = sigma_max(original)
    s_err = sigma_max(error)
    err_frob = frobenius_norm(error)

    ratio = err_frob / s_orig
    lower = 0.5 * (math.sqrt(sr_orig) - ratio)
    upper = 2.0 * (math.sqrt(sr_orig) + ratio)
    preconditions = (
        sigma_min(original) <= 1.0
        and s_err >= 1.0
        and s_orig >= 2.0 * s_err
    )
    root = math.sqrt(sr_quant)
    return TheoremCheck(
        sr_original=sr_orig,
        sr_quantized=sr_quant,
        error_frob=err_frob,
        sigma_max_original=s_orig,
        sigma_max_error=s_err,
        lower_bound=lower,
        upper_bound=upper,
        preconditions_met=preconditions,
        holds=lower <= root <= upper,
    )


def _validate_sweep_args(m: int, n: int, ranks: Sequence[int], omegas: Sequence[float],
                         bit_widths: Sequence[int | None], seeds: Sequence[int]) -> None:
    if m < 1 or n < 1:
        raise InputError(f"matrix dimensions must be positive, got {m}x{n}")
    if not ranks or not omegas or not bit_widths or not seeds:
        raise InputError("ranks, omegas, bit_widths, and seeds must all be nonempty")
    for k in ranks:
        if not (1 <= k <= min(m, n)):
            raise InputError(f"rank {k} outside [1, {min(m, n)}] for {m}x{n} factors")
    for omega in omegas:
        if not (omega > 0) or not math.isfinite(omega):
            raise InputError(f"omega must be positive and finite, got {omega!r}")
    for b in bit_widths:
        if b is not None and not (1 <= int(b) <= MAX_BITS):
            raise InputError(f"bits must be None or in [1, {MAX_BITS}], got {b!r}")
    for seed in seeds:
        if int(seed) < 0:
            raise InputError(f"seeds must be nonnegative, got {seed!r}")


def sweep_stable_rank(m: int, n: int, ranks: Sequence[int], omegas: Sequence[float],
                      bit_widths: Sequence[int | None], seeds: Sequence[int],
                      gamma_multiplier: float = 1.0) -> list[SweepPoint]:
    """Stable ranks over the (rank, omega, bits, seed) grid.

    Per (seed, rank) one factor pair is drawn and shared by every omega and
    bit width, so the grid varies reconstruction settings against a fixed
    draw. Deterministic: the draw depends only on (seed, rank, m, n).
    """
    _validate_sweep_args(m, n, ranks, omegas, bit_widths, seeds)
    gamma = default_gamma(n, gamma_multiplier)

    points = []
    for k in ranks:
        for seed in seeds:
            rng = np.random.default_rng(int(seed))
            scale = 1.0 / math.sqrt(k)
            a = rng.normal(0.0, scale, size=(m, k))
            b = rng.normal(0.0, scale, size=(k, n))
            product = a @ b
            sr_plain = stable_rank(product)

            quantized_products: dict[int | None, np.ndarray] = {None: product}
            for bits in bit_widths:
                if bits is None or bits in quantized_products:
                    continue
                qa = dequantize(quantize_matrix(a, int(bits)))
                qb = dequantize(quantize_matrix(b, int(bits)))
                quantized_products[int(bits)] = qa @ qb

            for omega in omegas:
                sine = np.sin(omega * product) / gamma
                sr_sine = stable_rank(sine)
                for bits in bit_widths:
                    key = None if bits is None else int(bits)
                    qprod = quantized_products[key]
                    if key is None:
                        sr_quant, sr_sine_quant = sr_plain, sr_sine
                    else:
                        sr_quant = stable_rank(qprod)
                        sr_sine_quant = stable_rank(np.sin(omega * qprod) / gamma)
                    points.append(SweepPoint(
                        rank=int(k), omega=float(omega), bits=key,
                        sr_plain=sr_plain, sr_quantized=sr_quant,
                        sr_sine=sr_sine, sr_sine_quantized=sr_sine_quant,
                        seed=int(seed),
                    ))
    return points


def sweep_to_csv(points: Iterable[SweepPoint]) -> str:
    """CSV rendering of sweep points; bits column says ``full`` for None."""
    lines = [CSV_HEADER]
    for p in points:
        bits = "full" if p.bits is None else str(p.bits)
        lines.append(
            f"{p.rank},{p.omega:.6g},{bits},{p.sr_plain:.6g},{p.sr_quantized:.6g},"
            f"{p.sr_sine:.6g},{p.sr_sine_quantized:.6g},{p.seed}"
        )
    return "\n".join(lines) + "\n"
