"""Binary containers for adapter tensors.

Two formats, both little-endian:

* dense interchange (magic ``ADLT``): named float32 tensors, row-major.
  No checksum; meant as the import/export surface for other tools.
* compressed (magic ``SLDQ``): named quantized tensors sharing one header
  (nominal bits, reconstruction flavor, omega, gamma multiplier). Each
  record stores its float32 codebook and a bit-packed index stream; the
  per-index width is the minimal width for that record's codebook size,
  so merged codebooks shrink the file. A CRC-32 over everything after the
  checksum field detects corruption anywhere in the payload.

Readers raise :class:`~sinedelta.errors.CorruptDataError` with a reason on
any structural problem: bad magic, unknown version, checksum mismatch,
truncation, trailing bytes, or fields that cannot describe a valid tensor.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import CorruptDataError, InputError
from .quantize import MAX_BITS, Codebook, QuantizedTensor

DENSE_MAGIC = b"ADLT"
COMPRESSED_MAGIC = b"SLDQ"
FORMAT_VERSION = 1

# magic + version + crc32 + bits + flavor + omega + gamma multiplier + count
_COMPRESSED_HEADER = struct.Struct("<4sHIBBffI")
# magic + version + count
_DENSE_HEADER = struct.Struct("<4sHI")
_CRC_OFFSET = 10  # bytes before the checksummed region: magic, version, crc


def index_width(num_centers: int) -> int:
    """Packed bits per index for a codebook of the given size."""
    if num_centers < 1:
        raise InputError(f"codebook size must be positive, got {num_centers}")
    return max(1, (num_centers - 1).bit_length())


def pack_indices(indices: np.ndarray, num_centers: int) -> bytes:
    """Pack indices LSB-first at the minimal width for ``num_centers``."""
    idx = np.asarray(indices)
    if idx.ndim != 1 or not np.issubdtype(idx.dtype, np.integer):
        raise InputError("indices must be a 1-D integer array")
    if idx.size and (idx.min() < 0 or idx.max() >= num_centers):
        raise InputError(f"indices out of range for {num_centers} centers")
    w = index_width(num_centers)
    bits = ((idx[:, None].astype(np.uint32) >> np.arange(w, dtype=np.uint32)) & 1)
    return np.packbits(bits.astype(np.uint8).ravel(), bitorder="little").tobytes()


def unpack_indices(data: bytes, count: int, num_centers: int) -> np.ndarray:
    """Inverse of :func:`pack_indices`; validates range and stream length."""
    if count < 0:
        raise InputError(f"count must be nonnegative, got {count}")
    w = index_width(num_centers)
    needed = (count * w + 7) // 8
    if len(data) < needed:
        raise CorruptDataError(
            f"index stream truncated: need {needed} bytes for {count} indices, have {len(data)}"
        )
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    bits = bits[: count * w].reshape(count, w).astype(np.uint32)
    idx = (bits << np.arange(w, dtype=np.uint32)).sum(axis=1).astype(np.int32)
    if count and idx.max() >= num_centers:
        raise CorruptDataError(
            f"index {int(idx.max())} out of range for codebook of {num_centers}"
        )
    return idx


def index_entropy(indices: np.ndarray) -> float:
    """Empirical Shannon entropy of the index stream, in bits per index.

    Lower-bounds what an entropy coder could spend per index; comparing it
    with the packed width shows how much the fixed-width stream leaves on
    the table.
    """
    idx = np.asarray(indices).ravel()
    if idx.size == 0:
        raise InputError("entropy of an empty index stream is undefined")
    if not np.issubdtype(idx.dtype, np.integer):
        raise InputError("indices must be integers")
    counts = np.bincount(idx)
    p = counts[counts > 0] / idx.size
    return float(-(p * np.log2(p)).sum())


def _tensor_record_size(name: str, q: QuantizedTensor) -> int:
    encoded = name.encode("utf-8")
    n_centers = len(q.codebook)
    packed = (q.count * index_width(n_centers) + 7) // 8
    return 2 + len(encoded) + 1 + 4 * len(q.shape) + 4 + 4 * n_centers + packed


def compressed_size(tensors: Mapping[str, QuantizedTensor]) -> int:
    """Exact byte size the compressed container will occupy."""
    total = _COMPRESSED_HEADER.size
    for name, q in tensors.items():
        total += _tensor_record_size(name, q)
    return total


def estimate_compressed_size(named_shapes: Mapping[str, tuple[int, ...]], bits: int) -> int:
    """Container size if every codebook comes out full (2**bits centers)."""
    total = _COMPRESSED_HEADER.size
    for name, shape in named_shapes.items():
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        encoded = name.encode("utf-8")
        packed = (count * bits + 7) // 8
        total += 2 + len(encoded) + 1 + 4 * len(shape) + 4 + 4 * (1 << bits) + packed
    return total


def _check_name(name: str) -> bytes:
    if not isinstance(name, str) or not name:
        raise InputError("tensor names must be nonempty strings")
    encoded = name.encode("utf-8")
    if len(encoded) > 0xFFFF:
        raise InputError(f"tensor name too long ({len(encoded)} bytes)")
    return encoded


def _check_shape(shape: tuple[int, ...]) -> None:
    if not shape or len(shape) > 8:
        raise InputError(f"tensor rank must be in [1, 8], got shape {shape!r}")
    for d in shape:
        if not (1 <= d <= 0xFFFFFFFF):
            raise InputError(f"invalid dimension {d!r} in shape {shape!r}")
    if int(np.prod(shape, dtype=np.int64)) > 0xFFFFFFFF:
        raise InputError(f"tensor of shape {shape!r} exceeds the u32 element limit")


@dataclass(frozen=True)
class CompressedFile:
    """Decoded compressed container: tensors plus shared reconstruction header."""

    tensors: dict[str, QuantizedTensor]
    bits: int
    flavor: int
    omega: float
    gamma_multiplier: float


def compressed_to_bytes(tensors: Mapping[str, QuantizedTensor], bits: int, flavor: int,
                        omega: float, gamma_multiplier: float) -> bytes:
    if not tensors:
        raise InputError("refusing to write an empty tensor set")
    if not (1 <= int(bits) <= MAX_BITS):
        raise InputError(f"bits must be in [1, {MAX_BITS}], got {bits!r}")
    if int(flavor) not in (0, 1):
        raise InputError(f"flavor byte must be 0 (plain) or 1 (sine), got {flavor!r}")
    if not (omega > 0) or not math.isfinite(omega):
        raise InputError(f"omega must be positive and finite, got {omega!r}")
    if not (gamma_multiplier > 0) or not math.isfinite(gamma_multiplier):
        raise InputError(f"gamma multiplier must be positive and finite, got {gamma_multiplier!r}")

    body = bytearray()
    for name, q in tensors.items():
        encoded = _check_name(name)
        if not isinstance(q, QuantizedTensor):
            raise InputError(f"tensor {name!r} is not quantized")
        _check_shape(q.shape)
        body += struct.pack("<H", len(encoded))
        body += encoded
        body += struct.pack("<B", len(q.shape))
        body += struct.pack(f"<{len(q.shape)}I", *q.shape)
        body += struct.pack("<I", len(q.codebook))
        body += q.codebook.centers.astype("<f4").tobytes()
        body += pack_indices(q.indices, len(q.codebook))

    tail = struct.pack("<BBffI", int(bits), int(flavor), float(omega),
                       float(gamma_multiplier), len(tensors)) + bytes(body)
    crc = zlib.crc32(tail) & 0xFFFFFFFF
    return COMPRESSED_MAGIC + struct.pack("<HI", FORMAT_VERSION, crc) + tail


class _Cursor:
    """Sequential reader that turns short reads into corruption errors."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptDataError(
                f"truncated while reading {what}: need {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size, what))

    def done(self) -> None:
        if self.pos != len(self.data):
            raise CorruptDataError(
                f"{len(self.data) - self.pos} trailing bytes after the last record"
            )


def compressed_from_bytes(data: bytes) -> CompressedFile:
    cur = _Cursor(data)
    magic = cur.take(4, "magic")
    if magic != COMPRESSED_MAGIC:
        raise CorruptDataError(f"bad magic {magic!r}; not a compressed adapter file")
    (version,) = cur.unpack("<H", "version")
    if version != FORMAT_VERSION:
        raise CorruptDataError(f"unsupported format version {version}")
    (stored_crc,) = cur.unpack("<I", "checksum")
    actual_crc = zlib.crc32(data[_CRC_OFFSET:]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise CorruptDataError(
            f"checksum mismatch: header says {stored_crc:#010x}, payload is {actual_crc:#010x}"
        )
    bits, flavor, omega, gamma_multiplier, count = cur.unpack("<BBffI", "file header")
    if not (1 <= bits <= MAX_BITS):
        raise CorruptDataError(f"header bits {bits} outside [1, {MAX_BITS}]")
    if flavor not in (0, 1):
        raise CorruptDataError(f"unknown flavor byte {flavor}")
    if not (omega > 0) or not math.isfinite(omega):
        raise CorruptDataError(f"invalid omega {omega!r}")
    if not (gamma_multiplier > 0) or not math.isfinite(gamma_multiplier):
        raise CorruptDataError(f"invalid gamma multiplier {gamma_multiplier!r}")
    if count == 0:
        raise CorruptDataError("file declares zero tensors")

    tensors: dict[str, QuantizedTensor] = {}
    for i in range(count):
        (name_len,) = cur.unpack("<H", f"name length of record {i}")
        raw_name = cur.take(name_len, f"name of record {i}")
        try:
            name = raw_name.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptDataError(f"record {i} name is not valid UTF-8") from exc
        if not name:
            raise CorruptDataError(f"record {i} has an empty name")
        if name in tensors:
            raise CorruptDataError(f"duplicate tensor name {name!r}")
        (ndim,) = cur.unpack("<B", f"rank of {name!r}")
        if not (1 <= ndim <= 8):
            raise CorruptDataError(f"tensor {name!r} has invalid rank {ndim}")
        shape = cur.unpack(f"<{ndim}I", f"shape of {name!r}")
        if any(d == 0 for d in shape):
            raise CorruptDataError(f"tensor {name!r} has a zero dimension")
        n_values = int(np.prod(shape, dtype=np.int64))
        (n_centers,) = cur.unpack("<I", f"codebook size of {name!r}")
        if not (1 <= n_centers <= (1 << bits)):
            raise CorruptDataError(
                f"tensor {name!r} declares {n_centers} centers; header allows at most {1 << bits}"
            )
        centers = np.frombuffer(cur.take(4 * n_centers, f"codebook of {name!r}"), dtype="<f4")
        packed_len = (n_values * index_width(n_centers) + 7) // 8
        packed = cur.take(packed_len, f"index stream of {name!r}")
        indices = unpack_indices(packed, n_values, n_centers)
        try:
            codebook = Codebook(centers=centers.copy(), bits=int(bits))
            tensors[name] = QuantizedTensor(shape=tuple(int(d) for d in shape),
                                            codebook=codebook, indices=indices)
        except InputError as exc:
            raise CorruptDataError(f"tensor {name!r} is not decodable: {exc}") from exc
    cur.done()
    return CompressedFile(tensors=tensors, bits=int(bits), flavor=int(flavor),
                          omega=float(omega), gamma_multiplier=float(gamma_multiplier))


def dense_to_bytes(tensors: Mapping[str, np.ndarray]) -> bytes:
    if not tensors:
        raise InputError("refusing to write an empty tensor set")
    body = bytearray()
    for name, values in tensors.items():
        encoded = _check_name(name)
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 0:
            raise InputError(f"tensor {name!r} is a scalar")
        _check_shape(arr.shape)
        if not np.isfinite(arr).all():
            raise InputError(f"tensor {name!r} contains non-finite values")
        body += struct.pack("<H", len(encoded))
        body += encoded
        body += struct.pack("<B", arr.ndim)
        body += struct.pack(f"<{arr.ndim}I", *arr.shape)
        body += arr.astype("<f4").tobytes(order="C")
    return _DENSE_HEADER.pack(DENSE_MAGIC, FORMAT_VERSION, len(tensors)) + bytes(body)


def dense_from_bytes(data: bytes) -> dict[str, np.ndarray]:
    cur = _Cursor(data)
    magic = cur.take(4, "magic")
    if magic != DENSE_MAGIC:
        raise CorruptDataError(f"bad magic {magic!r}; not a dense adapter file")
    (version,) = cur.unpack("<H", "version")
    if version != FORMAT_VERSION:
        raise CorruptDataError(f"unsupported format version {version}")
    (count,) = cur.unpack("<I", "tensor count")
    if count == 0:
        raise CorruptDataError("file declares zero tensors")
    tensors: dict[str, np.ndarray] = {}
    for i in range(count):
        (name_len,) = cur.unpack("<H", f"name length of record {i}")
        raw_name = cur.take(name_len, f"name of record {i}")
        try:
            name = raw_name.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptDataError(f"record {i} name is not valid UTF-8") from exc
        if not name:
            raise CorruptDataError(f"record {i} has an empty name")
        if name in tensors:
            raise CorruptDataError(f"duplicate tensor name {name!r}")
        (ndim,) = cur.unpack("<B", f"rank of {name!r}")
        if not (1 <= ndim <= 8):
            raise CorruptDataError(f"tensor {name!r} has invalid rank {ndim}")
        shape = cur.unpack(f"<{ndim}I", f"shape of {name!r}")
        if any(d == 0 for d in shape):
            raise CorruptDataError(f"tensor {name!r} has a zero dimension")
        n_values = int(np.prod(shape, dtype=np.int64))
        raw = cur.take(4 * n_values, f"values of {name!r}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        if not np.isfinite(arr).all():
            raise CorruptDataError(f"tensor {name!r} contains non-finite values")
        tensors[name] = arr
    cur.done()
    return tensors


def write_compressed(path, tensors: Mapping[str, QuantizedTensor], bits: int, flavor: int,
                     omega: float, gamma_multiplier: float) -> int:
    """Serialize to ``path``; returns the byte count written."""
    blob = compressed_to_bytes(tensors, bits, flavor, omega, gamma_multiplier)
    Path(path).write_bytes(blob)
    return len(blob)


def read_compressed(path) -> CompressedFile:
    return compressed_from_bytes(Path(path).read_bytes())


def write_dense(path, tensors: Mapping[str, np.ndarray]) -> int:
    """Serialize to ``path``; returns the byte count written."""
    blob = dense_to_bytes(tensors)
    Path(path).write_bytes(blob)
    return len(blob)


def read_dense(path) -> dict[str, np.ndarray]:
    return dense_from_bytes(Path(path).read_bytes())
