import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from randattn import TensorFormatError
from randattn.harness.tensorio import MAGIC, decode_tensor, encode_tensor, read_tensor, write_tensor


@given(arrays(np.float64, st.tuples(st.integers(0, 6), st.integers(0, 6)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_round_trip_is_bit_exact(X):
    back = decode_tensor(encode_tensor(X))
    assert back.shape == X.shape
    assert back.tobytes() == X.astype("<f8").tobytes()


def test_file_round_trip(tmp_path, rng):
    X = rng.standard_normal((7, 3))
    write_tensor(tmp_path / "x.bin", X)
    assert np.array_equal(read_tensor(tmp_path / "x.bin"), X)
    raw = (tmp_path / "x.bin").read_bytes()
    assert raw[:8] == b"MCATTN01"
    (hlen,) = struct.unpack_from("<I", raw, 8)
    assert json.loads(raw[12 : 12 + hlen]) == {"dims": [7, 3], "dtype": "f64", "order": "row-major"}


_HEADER = b'{"dims": [2, 2], "dtype": "f64", "order": "row-major"}'


def _with_header(header: bytes, payload: bytes = b"") -> bytes:
    return MAGIC + struct.pack("<I", len(header)) + header + payload


@pytest.mark.parametrize(
    "blob, offset",
    [
        (b"NOTMAGIC", 0),
        (MAGIC + b"\x01", 8),
        (MAGIC + struct.pack("<I", 50) + b"{}", 12),
        (_with_header(b"{not json"), 12),
        (_with_header(b'{"dims": [2], "dtype": "f64", "order": "row-major"}'), 12),
        (_with_header(b'{"dims": [1, 1], "dtype": "f32", "order": "row-major"}'), 12),
        (_with_header(_HEADER, b"\0" * 24), 12 + len(_HEADER)),
    ],
)
def test_malformed_files_report_offset(blob, offset):
    with pytest.raises(TensorFormatError) as err:
        decode_tensor(blob)
    assert err.value.offset == offset
    assert f"offset {offset}" in str(err.value)


def test_rejects_non_matrix():
    with pytest.raises(ValueError):
        encode_tensor(np.zeros(3))
