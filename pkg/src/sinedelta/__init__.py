"""Quantized low-rank adapter compression with sine reconstruction.

The pipeline: factor a weight delta as a thin product, quantize each factor
with an exact 1-D k-means codebook, store the result in a checksummed
container, and reconstruct either the raw product or its fixed-frequency
sine, which recovers stable rank that quantization and the low-rank
bottleneck squeeze out. Companion analysis tools check the spectral bound
behind that claim, sweep stable ranks over parameter grids, fit adapters to
synthetic targets, and score rate-quality tradeoffs with Bjontegaard
deltas.
"""

from .adapter import (AdapterPair, AdapterSet, DEFAULT_OMEGA, Flavor, default_gamma,
                      estimate_quantized_bytes, full_precision_bytes, memory_footprint,
                      reconstruct_delta, reconstruct_quantized_delta)
from .bd import (AkimaSpline, BDResult, FittedCubic, Interpolator, RDCurve, RDPoint,
                 akima_interpolate, bd_quality, bd_rate, compare, cubic_fit_interpolate,
                 curve_from_arrays, read_curve_csv)
from .codec import (CompressedFile, compressed_from_bytes, compressed_to_bytes,
                    dense_from_bytes, dense_to_bytes, estimate_compressed_size,
                    index_entropy, index_width, pack_indices, read_compressed,
                    read_dense, unpack_indices, write_compressed, write_dense)
from .errors import CorruptDataError, InputError, NumericError
from .fitting import (ExpressivityRow, FitConfig, FitReport, expressivity_report,
                      expressivity_to_csv, fit, loss_and_gradients)
from .linalg import frobenius_norm, sigma_max, sigma_min, stable_rank
from .quantize import (Codebook, MAX_BITS, QuantizedTensor, dequantize, kmeans_1d,
                       quantization_error, quantize_matrix)
from .theory import SweepPoint, TheoremCheck, check_theorem, sweep_stable_rank, sweep_to_csv

__version__ = "0.1.0"

__all__ = [
    "AdapterPair", "AdapterSet", "AkimaSpline", "BDResult", "Codebook",
    "CompressedFile", "CorruptDataError", "DEFAULT_OMEGA", "ExpressivityRow",
    "FitConfig", "FitReport", "FittedCubic", "Flavor", "InputError", "Interpolator",
    "MAX_BITS", "NumericError", "QuantizedTensor", "RDCurve", "RDPoint", "SweepPoint",
    "TheoremCheck", "akima_interpolate", "bd_quality", "bd_rate", "check_theorem",
    "compare", "compressed_from_bytes", "compressed_to_bytes", "cubic_fit_interpolate",
    "curve_from_arrays", "default_gamma", "dense_from_bytes", "dense_to_bytes",
    "dequantize", "estimate_compressed_size", "estimate_quantized_bytes",
    "expressivity_report", "expressivity_to_csv", "fit", "frobenius_norm",
    "full_precision_bytes", "index_entropy", "index_width", "kmeans_1d",
    "loss_and_gradients", "memory_footprint", "pack_indices", "quantization_error",
    "quantize_matrix", "read_compressed", "read_curve_csv", "read_dense",
    "reconstruct_delta", "reconstruct_quantized_delta", "sigma_max", "sigma_min",
    "stable_rank", "sweep_stable_rank", "sweep_to_csv", "unpack_indices",
    "write_compressed", "write_dense",
]
