"""Container serialization: round trips, checksums, hostile inputs."""

import struct
import zlib

import numpy as np
import pytest

from sinedelta.codec import (COMPRESSED_MAGIC, DENSE_MAGIC,
                             compressed_from_bytes, compressed_size,
                             compressed_to_bytes, dense_from_bytes,
                             dense_to_bytes, estimate_compressed_size,
                             index_entropy, index_width, pack_indices,
                             read_compressed, read_dense, unpack_indices,
                             write_compressed, write_dense)
from sinedelta.errors import CorruptDataError, InputError
from sinedelta.quantize import QuantizedTensor, kmeans_1d, quantize_matrix


def small_tensors(bits=2, seed=0):
    rng = np.random.default_rng(seed)
    return {
        "w.A": quantize_matrix(rng.normal(size=(4, 3)), bits),
        "w.B": quantize_matrix(rng.normal(size=(3, 5)), bits),
    }


def small_blob(bits=2, seed=0):
    return compressed_to_bytes(small_tensors(bits, seed), bits, 1, 200.0, 1.0)


def assert_tensors_equal(x, y):
    assert list(x) == list(y)
    for name in x:
        qx, qy = x[name], y[name]
        assert qx.shape == qy.shape
        assert qx.codebook.bits == qy.codebook.bits
        np.testing.assert_array_equal(qx.codebook.centers, qy.codebook.centers)
        np.testing.assert_array_equal(qx.indices, qy.indices)


class TestIndexPacking:
    def test_width_grows_with_codebook(self):
        assert index_width(1) == 1
        assert index_width(2) == 1
        assert index_width(3) == 2
        assert index_width(4) == 2
        assert index_width(5) == 3
        assert index_width(256) == 8
        assert index_width(257) == 9

    def test_pinned_two_bit_byte(self):
        packed = pack_indices(np.array([1, 0, 3, 2]), 4)
        assert packed == bytes([0xB1])

    def test_pinned_single_index(self):
        assert pack_indices(np.array([1]), 8) == bytes([0x01])

    def test_round_trip_every_width(self):
        rng = np.random.default_rng(3)
        for count in (1, 2, 3, 4, 5, 6, 7, 8, 255, 256, 257, 65537):
            idx = rng.integers(0, count, size=97)
            out = unpack_indices(pack_indices(idx, count), 97, count)
            np.testing.assert_array_equal(out, idx)

    def test_unpack_rejects_wrong_length(self):
        with pytest.raises(CorruptDataError):
            unpack_indices(b"\x00", 9, 4)

    def test_unpack_rejects_out_of_range(self):
        """Index 3 fits the 2-bit lanes of a 3-center codebook but exceeds
        its highest valid index."""
        packed = pack_indices(np.array([3]), 4)
        with pytest.raises(CorruptDataError):
            unpack_indices(packed, 1, 3)


class TestIndexEntropy:
    def test_uniform_four_symbols(self):
        assert index_entropy(np.array([0, 1, 2, 3])) == pytest.approx(2.0)

    def test_constant_stream(self):
        assert index_entropy(np.zeros(10, dtype=np.int64)) == 0.0

    def test_biased_stream(self):
        ent = index_entropy(np.array([0, 0, 0, 1]))
        expected = -(0.75 * np.log2(0.75) + 0.25 * np.log2(0.25))
        assert ent == pytest.approx(expected, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            index_entropy(np.array([], dtype=np.int64))


class TestCompressedRoundTrip:
    @pytest.mark.parametrize("bits", list(range(1, 17)))
    def test_all_widths(self, bits):
        tensors = small_tensors(bits=bits, seed=bits)
        blob = compressed_to_bytes(tensors, bits, 1, 200.0, 1.0)
        back = compressed_from_bytes(blob)
        assert back.bits == bits
        assert back.flavor == 1
        assert back.omega == 200.0
        assert back.gamma_multiplier == 1.0
        assert_tensors_equal(tensors, back.tensors)
        reblob = compressed_to_bytes(back.tensors, back.bits, back.flavor,
                                     back.omega, back.gamma_multiplier)
        assert reblob == blob

    def test_size_accounting_is_exact(self):
        tensors = small_tensors()
        blob = compressed_to_bytes(tensors, 2, 1, 200.0, 1.0)
        assert compressed_size(tensors) == len(blob)
        est = estimate_compressed_size({n: q.shape for n, q in tensors.items()}, 2)
        assert est >= len(blob)

    def test_file_round_trip(self, tmp_path):
        tensors = small_tensors()
        path = tmp_path / "deltas.sldq"
        written = write_compressed(path, tensors, 2, 1, 200.0, 1.0)
        assert written == path.stat().st_size
        back = read_compressed(path)
        assert_tensors_equal(tensors, back.tensors)

    def test_one_dimensional_record(self):
        """The container admits any rank up to 8 even though the quantizer
        itself only produces matrices."""
        cb, asn, _ = kmeans_1d(np.arange(6, dtype=float), 6)
        q = QuantizedTensor(shape=(6,), codebook=cb, indices=asn)
        blob = compressed_to_bytes({"bias": q}, 3, 0, 200.0, 1.0)
        back = compressed_from_bytes(blob)
        assert back.tensors["bias"].shape == (6,)


class TestCompressedValidation:
    def test_empty_tensor_set(self):
        with pytest.raises(InputError):
            compressed_to_bytes({}, 2, 0, 200.0, 1.0)

    def test_bad_flavor_value(self):
        with pytest.raises(InputError):
            compressed_to_bytes(small_tensors(), 2, 7, 200.0, 1.0)

    def test_nonpositive_omega(self):
        with pytest.raises(InputError):
            compressed_to_bytes(small_tensors(), 2, 1, 0.0, 1.0)

    def test_bad_bits(self):
        with pytest.raises(InputError):
            compressed_to_bytes(small_tensors(), 0, 1, 200.0, 1.0)
        with pytest.raises(InputError):
            compressed_to_bytes(small_tensors(), 17, 1, 200.0, 1.0)

    def test_overlong_name(self):
        q = quantize_matrix(np.ones((2, 2)), 1)
        with pytest.raises(InputError):
            compressed_to_bytes({"x" * 70000: q}, 1, 0, 200.0, 1.0)

    def test_empty_name(self):
        q = quantize_matrix(np.ones((2, 2)), 1)
        with pytest.raises(InputError):
            compressed_to_bytes({"": q}, 1, 0, 200.0, 1.0)


class TestCompressedCorruption:
    def test_every_single_byte_flip_detected(self):
        """Flip each byte of a small container in turn. Every mutant must be
        rejected: the checksum covers everything after its own field, and
        the pre-checksum header fields are validated directly."""
        blob = bytearray(small_blob())
        for pos in range(len(blob)):
            mutant = bytearray(blob)
            mutant[pos] ^= 0xFF
            with pytest.raises(CorruptDataError):
                compressed_from_bytes(bytes(mutant))

    def test_every_truncation_detected(self):
        blob = small_blob()
        for end in range(len(blob)):
            with pytest.raises(CorruptDataError):
                compressed_from_bytes(blob[:end])

    def test_trailing_garbage_detected(self):
        with pytest.raises(CorruptDataError):
            compressed_from_bytes(small_blob() + b"\x00")

    def test_wrong_magic(self):
        blob = small_blob()
        with pytest.raises(CorruptDataError):
            compressed_from_bytes(b"XXXX" + blob[4:])

    def test_future_version(self):
        blob = bytearray(small_blob())
        struct.pack_into("<H", blob, 4, 2)
        with pytest.raises(CorruptDataError):
            compressed_from_bytes(bytes(blob))

    def test_duplicate_names_rejected(self):
        """Hand-build a payload repeating one record; the reader must not
        silently keep either copy."""
        tensors = small_tensors()
        only = {"w.A": tensors["w.A"]}
        blob = bytearray(compressed_to_bytes(only, 2, 1, 200.0, 1.0))
        record = bytes(blob[24:])
        doubled = blob[:24] + record + record
        struct.pack_into("<I", doubled, 20, 2)
        struct.pack_into("<I", doubled, 6, zlib.crc32(bytes(doubled[10:])))
        with pytest.raises(CorruptDataError):
            compressed_from_bytes(bytes(doubled))


class TestDense:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        tensors = {"w.A": rng.normal(size=(4, 3)).astype(np.float32),
                   "w.B": rng.normal(size=(3, 5)).astype(np.float32)}
        blob = dense_to_bytes(tensors)
        assert blob[:4] == DENSE_MAGIC
        back = dense_from_bytes(blob)
        assert list(back) == list(tensors)
        for name in tensors:
            assert back[name].dtype == np.float32
            np.testing.assert_array_equal(back[name], tensors[name])
        path = tmp_path / "weights.adlt"
        written = write_dense(path, tensors)
        assert written == path.stat().st_size
        np.testing.assert_array_equal(read_dense(path)["w.A"], tensors["w.A"])

    def test_float64_input_stored_as_float32(self):
        tensors = {"t": np.array([[1.0, 2.0]], dtype=np.float64)}
        back = dense_from_bytes(dense_to_bytes(tensors))
        assert back["t"].dtype == np.float32

    def test_non_finite_rejected(self):
        with pytest.raises(InputError):
            dense_to_bytes({"t": np.array([[np.inf]])})

    def test_truncation_detected(self):
        blob = dense_to_bytes({"t": np.ones((2, 2), dtype=np.float32)})
        with pytest.raises(CorruptDataError):
            dense_from_bytes(blob[:-1])

    def test_wrong_magic(self):
        blob = dense_to_bytes({"t": np.ones((2, 2), dtype=np.float32)})
        with pytest.raises(CorruptDataError):
            dense_from_bytes(COMPRESSED_MAGIC + blob[4:])
