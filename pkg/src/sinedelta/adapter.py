"""Low-rank adapter pairs and their reconstruction.

An adapter pair holds factors ``a`` (m x k) and ``b`` (k x n) with bottleneck
rank k. Reconstruction either multiplies them out directly (plain flavor) or
passes the product through a fixed-frequency sine, ``sin(omega * a @ b) / gamma``,
which raises the stable rank of the delta without adding parameters.

``gamma`` defaults to ``multiplier * sqrt(n)`` where n is the reconstruction's
row dimension (the column count of ``b``); multiplier 1 suits most uses, 2 is
the text-to-image convention. The default is recomputed at reconstruction
time unless a pair carries an explicit override.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping

import numpy as np

from . import codec
from .errors import InputError
from .linalg import as_matrix
from .quantize import QuantizedTensor, dequantize

DEFAULT_OMEGA = 200.0


class Flavor(IntEnum):
    """Reconstruction activation: raw product, or sine of the product."""

    PLAIN = 0
    SINE = 1

    @classmethod
    def parse(cls, text: str) -> "Flavor":
        try:
            return cls[str(text).upper()]
        except KeyError:
            raise InputError(f"unknown flavor {text!r}; expected 'plain' or 'sine'") from None


def default_gamma(n: int, multiplier: float = 1.0) -> float:
    """Scale divisor for sine reconstruction: ``multiplier * sqrt(n)``."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InputError(f"row dimension must be a positive integer, got {n!r}")
    if not (multiplier > 0) or not math.isfinite(multiplier):
        raise InputError(f"gamma multiplier must be positive, got {multiplier!r}")
    return multiplier * math.sqrt(n)


@dataclass(frozen=True)
class AdapterPair:
    """One adapter: factors plus its reconstruction conventions."""

    a: np.ndarray
    b: np.ndarray
    flavor: Flavor
    omega: float = DEFAULT_OMEGA
    gamma: float | None = None  # None: default_gamma(n) at reconstruction time

    def __post_init__(self):
        a = as_matrix(self.a, "factor a")
        b = as_matrix(self.b, "factor b")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if a.shape[1] != b.shape[0]:
            raise InputError(
                f"factor shapes do not compose: {a.shape} @ {b.shape}"
            )
        k = a.shape[1]
        if k > min(a.shape[0], b.shape[1]):
            raise InputError(
                f"bottleneck rank {k} exceeds min(m, n) = {min(a.shape[0], b.shape[1])}"
            )
        if self.flavor == Flavor.SINE and not (self.omega > 0):
            raise InputError(f"sine flavor needs omega > 0, got {self.omega!r}")
        if self.gamma is not None and not (self.gamma > 0):
            raise InputError(f"gamma must be positive, got {self.gamma!r}")

    @property
    def rank(self) -> int:
        return int(self.a.shape[1])


@dataclass(frozen=True)
class AdapterSet:
    """Named adapter pairs sharing reconstruction conventions."""

    pairs: Mapping[str, AdapterPair]
    default_omega: float = DEFAULT_OMEGA
    gamma_multiplier: float = 1.0

    def __post_init__(self):
        pairs = dict(self.pairs)
        object.__setattr__(self, "pairs", pairs)
        for name in pairs:
            if not name:
                raise InputError("adapter names must be nonempty")
        if not (self.default_omega > 0):
            raise InputError("default omega must be positive")
        if not (self.gamma_multiplier > 0):
            raise InputError("gamma multiplier must be positive")

    def __iter__(self):
        return iter(self.pairs.items())

    def __len__(self) -> int:
        return len(self.pairs)


def _activate(product: np.ndarray, flavor: Flavor, omega: float, gamma: float | None,
              gamma_multiplier: float) -> np.ndarray:
    if flavor == Flavor.PLAIN:
        return product
    if flavor != Flavor.SINE:
        raise InputError(f"unknown flavor {flavor!r}")
    g = gamma if gamma is not None else default_gamma(product.shape[1], gamma_multiplier)
    if not (g > 0):
        raise InputError(f"gamma must be positive, got {g!r}")
    return np.sin(omega * product) / g


def reconstruct_delta(pair: AdapterPair, gamma_multiplier: float = 1.0) -> np.ndarray:
    """Dense weight delta of an adapter pair.

    Plain flavor returns ``a @ b``; sine flavor returns
    ``sin(omega * (a @ b)) / gamma``. Sine entries are bounded by
    ``1/gamma`` in magnitude.
    """
    product = pair.a @ pair.b
    return _activate(product, pair.flavor, pair.omega, pair.gamma, gamma_multiplier)


def reconstruct_quantized_delta(qa: QuantizedTensor, qb: QuantizedTensor,
                                flavor: Flavor, omega: float = DEFAULT_OMEGA,
                                gamma: float | None = None,
                                gamma_multiplier: float = 1.0) -> np.ndarray:
    """Delta from quantized factors: dequantize, then reconstruct."""
    a = dequantize(qa)
    b = dequantize(qb)
    if a.ndim != 2 or b.ndim != 2:
        raise InputError("quantized factors must be 2-D")
    if a.shape[1] != b.shape[0]:
        raise InputError(f"factor shapes do not compose: {a.shape} @ {b.shape}")
    if flavor == Flavor.SINE and not (omega > 0):
        raise InputError(f"sine flavor needs omega > 0, got {omega!r}")
    return _activate(a @ b, flavor, omega, gamma, gamma_multiplier)


def memory_footprint(tensors: Mapping[str, QuantizedTensor]) -> int:
    """Exact serialized size in bytes of a quantized tensor set.

    Matches the compressed container byte for byte: per tensor the packed
    index stream (the per-index width is the minimal width for the actual
    codebook size), the float32 codebook, and the record header; plus the
    fixed file header.
    """
    if not tensors:
        raise InputError("footprint of an empty tensor set is undefined")
    widths = {q.codebook.bits for q in tensors.values()}
    if len(widths) > 1:
        raise InputError(f"tensors mix nominal bit widths {sorted(widths)}")
    return codec.compressed_size(tensors)


def full_precision_bytes(param_count: int) -> int:
    """Accounting baseline for unquantized adapters: 16-bit storage, no codebook."""
    if not isinstance(param_count, (int, np.integer)) or param_count < 1:
        raise InputError(f"parameter count must be a positive integer, got {param_count!r}")
    return 2 * int(param_count)


def estimate_quantized_bytes(named_shapes: Mapping[str, tuple[int, ...]], bits: int) -> int:
    """Predicted container size for tensors of the given shapes at ``bits``.

    Assumes every codebook is full (2**bits centers), which holds whenever a
    tensor has more distinct values than clusters. Useful for planning a
    quantization level without materializing data.
    """
    if not named_shapes:
        raise InputError("no tensor shapes given")
    if not (1 <= int(bits) <= 16):
        raise InputError(f"bits must be in [1, 16], got {bits!r}")
    return codec.estimate_compressed_size(named_shapes, int(bits))
