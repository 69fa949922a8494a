import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from attnmorph.data import read_raster, write_raster
from attnmorph.data.netpbm import decode, encode, encode_levels
from attnmorph.errors import InputError, ParseError


def test_p5_example():
    blob = b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64])
    np.testing.assert_allclose(decode(blob), [[0.0, 128 / 255], [1.0, 64 / 255]], rtol=0, atol=1e-15)
    np.testing.assert_allclose(decode(blob), [[0.0, 0.50196], [1.0, 0.25098]], atol=5e-6)


def test_encode_header_layout():
    blob = encode(np.array([[0.0, 1.0]]), bits=8)
    assert blob == b"P5\n2 1\n255\n\x00\xff"


def test_p6_sixteen_bit_big_endian():
    raster = np.zeros((1, 2, 3))
    raster[0, 0] = [1.0, 0.0, 258 / 65535]
    raster[0, 1] = [0.5, 1 / 65535, 0.0]
    blob = encode(raster, bits=16)
    header = b"P6\n2 1\n65535\n"
    assert blob[: len(header)] == header
    # 0.5 * 65535 = 32767.5 rounds half to even -> 32768 = 0x8000
    assert blob[len(header):] == bytes([0xFF, 0xFF, 0, 0, 0x01, 0x02, 0x80, 0x00, 0, 1, 0, 0])
    back = decode(blob)
    assert back.shape == (1, 2, 3)
    assert back[0, 0, 2] == 258 / 65535


def test_header_comments_and_whitespace():
    blob = b"P5 # comment\n 3\t1 # more\n255\n" + bytes([1, 2, 3])
    np.testing.assert_array_equal(decode(blob) * 255, [[1, 2, 3]])


def test_arbitrary_maxval():
    blob = encode_levels(np.array([[0, 7, 15]]), 15)
    np.testing.assert_array_equal(decode(blob), [[0.0, 7 / 15, 1.0]])
    blob = encode_levels(np.array([[0, 1000]]), 1000)
    np.testing.assert_array_equal(decode(blob), [[0.0, 1.0]])


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_eight_bit_round_trip(levels):
    back = decode(encode(levels / 255.0))
    np.testing.assert_array_equal(np.rint(back * 255).astype(np.uint8), levels)
    np.testing.assert_array_equal(back, levels / 255.0)


def test_round_trip_on_disk(tmp_path):
    levels = np.arange(12).reshape(3, 4) * 20
    write_raster(levels / 255.0, tmp_path / "x.pgm")
    np.testing.assert_array_equal(read_raster(tmp_path / "x.pgm"), levels / 255.0)


def test_color_round_trip(tmp_path):
    levels = np.random.default_rng(0).integers(0, 256, size=(4, 5, 3))
    write_raster(levels / 255.0, tmp_path / "c.ppm")
    np.testing.assert_array_equal(read_raster(tmp_path / "c.ppm"), levels / 255.0)


def test_sixteen_bit_round_trip():
    levels = np.random.default_rng(1).integers(0, 65536, size=(3, 4))
    np.testing.assert_array_equal(decode(encode(levels / 65535.0, bits=16)), levels / 65535.0)


@pytest.mark.parametrize("blob, offset", [
    (b"P2\n2 2\n255\n" + bytes(4), 0),
    (b"P5\nxx 2\n255\n" + bytes(4), 3),
    (b"P5\n2 2\n70000\n" + bytes(4), 7),
    (b"P5\n2 0\n255\n", 5),
    (b"P5\n2 2", 6),
    (b"P5\n2 2\n255\n" + bytes(3), 14),
    (b"P5\n2 2\n65535\n" + bytes(7), 20),
    (b"P5 # no newline", 3),
])
def test_parse_errors_carry_offsets(blob, offset):
    with pytest.raises(ParseError) as info:
        decode(blob, path="bad.pgm")
    assert info.value.offset == offset
    assert "bad.pgm" in str(info.value) and f"byte {offset}" in str(info.value)


def test_truncated_file_on_disk(tmp_path):
    path = tmp_path / "t.pgm"
    path.write_bytes(b"P5\n4 4\n255\n" + bytes(10))
    with pytest.raises(ParseError, match="truncated payload"):
        read_raster(path)


def test_encode_rejects_bad_input():
    with pytest.raises(InputError):
        encode(np.zeros((2, 2, 2)))
    with pytest.raises(InputError):
        encode(np.zeros((2, 2)), bits=12)
