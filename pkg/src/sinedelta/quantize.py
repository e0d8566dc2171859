"""Scalar quantization by globally optimal 1-D k-means.

The solver is not Lloyd's algorithm. Clusters of an optimal 1-D k-means
solution are contiguous in sorted order, so the problem reduces to dynamic
programming over split points. The DP layer fill uses monotone
divide-and-conquer (the optimal split index is non-decreasing in the right
endpoint), giving O(k * n * log n) overall. Input values are collapsed to
(distinct value, count) pairs first, which both shrinks the DP and makes
the d <= k case trivial: every distinct value becomes its own center at
zero cost.

Codebook centers are stored as float32, matching the serialized format
exactly so that a written and re-read codebook is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CorruptDataError, InputError

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


MAX_BITS = 16


@dataclass(frozen=True)
class Codebook:
    """Sorted quantization centers plus the nominal index width in bits."""

    centers: np.ndarray  # float32, strictly increasing
    bits: int

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float32)
        object.__setattr__(self, "centers", centers)
        if centers.ndim != 1 or centers.size < 1:
            raise InputError("codebook must hold at least one center")
        if not np.isfinite(centers).all():
            raise InputError("codebook centers must be finite")
        if centers.size > 1 and not (np.diff(centers) > 0).all():
            raise InputError("codebook centers must be strictly increasing")
        if not (1 <= self.bits <= MAX_BITS):
            raise InputError(f"codebook bits must be in [1, {MAX_BITS}], got {self.bits}")
        if centers.size > (1 << self.bits):
            raise InputError(
                f"{centers.size} centers do not fit in {self.bits}-bit indices"
            )

    def __len__(self) -> int:
        return int(self.centers.size)


@dataclass(frozen=True)
class QuantizedTensor:
    """A tensor reduced to codebook indices.

    ``indices`` is flat, int32, in row-major element order; its length must
    equal the product of ``shape``.
    """

    shape: tuple[int, ...]
    codebook: Codebook
    indices: np.ndarray

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "shape", shape)
        indices = np.asarray(self.indices, dtype=np.int32)
        object.__setattr__(self, "indices", indices)
        if len(shape) < 1 or any(s < 1 for s in shape):
            raise InputError(f"tensor shape must be positive, got {shape}")
        if indices.ndim != 1 or indices.size != self.count:
            raise InputError(
                f"expected {self.count} flat indices for shape {shape}, "
                f"got {indices.size}"
            )
        if indices.size and (indices.min() < 0 or indices.max() >= len(self.codebook)):
            raise InputError("quantized indices fall outside the codebook")

    @property
    def count(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n


@njit(cache=True, nogil=True)
def _kmeans_dp(x, w, k):  # pragma: no cover - exercised via kmeans_1d
    """Exact weighted k-means DP over sorted distinct values.

    Returns (cost, opt) where opt[j, i] is the leftmost optimal start index
    of the last cluster when values 0..i are grouped into j+1 clusters.
    Interval costs come from prefix sums; the divide-and-conquer fill
    relies on the monotonicity of the optimal split point.
    """
    d = x.shape[0]
    pw = np.zeros(d + 1)
    pwx = np.zeros(d + 1)
    pwx2 = np.zeros(d + 1)
    for i in range(d):
        pw[i + 1] = pw[i] + w[i]
        pwx[i + 1] = pwx[i] + w[i] * x[i]
        pwx2[i + 1] = pwx2[i] + w[i] * x[i] * x[i]

    prev = np.empty(d)
    cur = np.empty(d)
    opt = np.zeros((k, d), dtype=np.int32)
    for i in range(d):
        tw = pw[i + 1]
        ts = pwx[i + 1]
        prev[i] = pwx2[i + 1] - ts * ts / tw

    # stack of (ilo, ihi, slo, shi) ranges for the current layer
    stack = np.empty((2 * d + 8, 4), dtype=np.int64)
    for j in range(1, k):
        top = 0
        stack[top, 0] = j
        stack[top, 1] = d - 1
        stack[top, 2] = j
        stack[top, 3] = d - 1
        top = 1
        while top > 0:
            top -= 1
            ilo = stack[top, 0]
            ihi = stack[top, 1]
            slo = stack[top, 2]
            shi = stack[top, 3]
            if ilo > ihi:
                continue
            mid = (ilo + ihi) // 2
            hi_s = shi if shi < mid else mid
            best = np.inf
            best_s = slo
            for s in range(slo, hi_s + 1):
                tw = pw[mid + 1] - pw[s]
                ts = pwx[mid + 1] - pwx[s]
                c = prev[s - 1] + (pwx2[mid + 1] - pwx2[s]) - ts * ts / tw
                if c < best:
                    best = c
                    best_s = s
            cur[mid] = best
            opt[j, mid] = best_s
            stack[top, 0] = ilo
            stack[top, 1] = mid - 1
            stack[top, 2] = slo
            stack[top, 3] = best_s
            top += 1
            stack[top, 0] = mid + 1
            stack[top, 1] = ihi
            stack[top, 2] = best_s
            stack[top, 3] = shi
            top += 1
        prev, cur = cur, prev

    cost = prev[d - 1]
    if cost < 0.0:
        cost = 0.0
    return cost, opt


def _nearest_center_indices(values: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the nearest center per value; midpoint ties go to the lower center."""
    if centers.size == 1:
        return np.zeros(values.size, dtype=np.int32)
    c = centers.astype(np.float64)
    midpoints = (c[:-1] + c[1:]) / 2.0
    # searchsorted side='left': a value equal to a midpoint keeps the lower index
    return np.searchsorted(midpoints, values, side="left").astype(np.int32)


def _minimal_bits(n_centers: int) -> int:
    return max(1, int(n_centers - 1).bit_length())


def kmeans_1d(values, k: int) -> tuple[Codebook, np.ndarray, float]:
    """Globally optimal k-means clustering of scalars.

    Returns ``(codebook, assignments, cost)``: the sorted centers (at most
    ``k``; exactly the distinct values when there are no more than ``k`` of
    them), the nearest-center index of every input value in original order,
    and the optimal within-cluster sum of squared distances.

    The returned codebook's ``bits`` field is the minimal width that can
    index it; callers that quantize at a nominal width override it.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise InputError("cannot cluster an empty value list")
    if not np.isfinite(vals).all():
        raise InputError("values must be finite")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InputError(f"cluster count must be a positive integer, got {k!r}")

    uniq, counts = np.unique(vals, return_counts=True)
    d = uniq.size

    if d <= k:
        centers64 = uniq
        cost = 0.0
    else:
        cost, opt = _kmeans_dp(uniq, counts.astype(np.float64), int(k))
        # Recover cluster boundaries by walking the split table backwards.
        bounds = np.empty(k + 1, dtype=np.int64)
        bounds[k] = d
        end = d - 1
        for j in range(k - 1, -1, -1):
            start = int(opt[j, end]) if j > 0 else 0
            bounds[j] = start
            end = start - 1
        centers64 = np.empty(k)
        for j in range(k):
            seg = slice(bounds[j], bounds[j + 1])
            centers64[j] = np.average(uniq[seg], weights=counts[seg])

    centers32 = np.unique(centers64.astype(np.float32))
    if centers32.size > (1 << MAX_BITS):
        raise InputError(
            f"{centers32.size} centers exceed the {MAX_BITS}-bit index limit"
        )
    codebook = Codebook(centers=centers32, bits=_minimal_bits(centers32.size))
    assignments = _nearest_center_indices(vals, centers32)
    return codebook, assignments, float(cost)


def quantize_matrix(m, bits: int) -> QuantizedTensor:
    """Quantize a matrix at a nominal index width of ``bits`` (1..16).

    Runs exact k-means with ``2**bits`` clusters over the flattened
    (row-major) entries. The codebook may come out smaller when the matrix
    has fewer distinct values than clusters.
    """
    from .linalg import as_matrix  # local import keeps module deps one-way

    a = as_matrix(m)
    if not isinstance(bits, (int, np.integer)) or not (1 <= bits <= MAX_BITS):
        raise InputError(f"bits must be an integer in [1, {MAX_BITS}], got {bits!r}")
    codebook, assignments, _cost = kmeans_1d(a.ravel(order="C"), 1 << int(bits))
    codebook = Codebook(centers=codebook.centers, bits=int(bits))
    return QuantizedTensor(shape=a.shape, codebook=codebook, indices=assignments)


def dequantize(q: QuantizedTensor) -> np.ndarray:
    """Exact codebook lookup, reshaped to the tensor's stored shape.

    Raises ``CorruptDataError`` when an index points outside the codebook
    (possible for tensors whose index array was mutated after construction
    or decoded from a hostile container).
    """
    indices = np.asarray(q.indices)
    n_centers = len(q.codebook)
    if indices.size and (indices.min() < 0 or indices.max() >= n_centers):
        raise CorruptDataError(
            f"index out of codebook range (codebook holds {n_centers} centers)"
        )
    values = q.codebook.centers.astype(np.float64)[indices]
    return values.reshape(q.shape)


def quantization_error(m, q: QuantizedTensor) -> np.ndarray:
    """Elementwise residual ``dequantize(q) - m``."""
    from .linalg import as_matrix

    a = as_matrix(m)
    deq = dequantize(q)
    if deq.shape != a.shape:
        raise InputError(f"shape mismatch: tensor is {deq.shape}, matrix is {a.shape}")
    return deq - a
