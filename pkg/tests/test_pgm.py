import numpy as np
import pytest

from caqim.pgm import PGMError, crop_to_blocks, load_plane, read_pgm, write_pgm


def test_round_trip_bit_exact(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (24, 40), dtype=np.uint8)
    p = tmp_path / "a.pgm"
    write_pgm(p, img)
    assert p.read_bytes().startswith(b"P5\n40 24\n255\n")
    np.testing.assert_array_equal(read_pgm(p), img)


def test_header_comments(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n# depth\n255\n\x01\x02")
    np.testing.assert_array_equal(read_pgm(p), [[1, 2]])


@pytest.mark.parametrize("data", [b"P2\n1 1\n255\n0", b"P5\n2 2\n65535\n" + b"\0" * 8,
                                  b"P5\n4 4\n255\n\0\0", b"P5\n"])
def test_rejects(tmp_path, data):
    p = tmp_path / "bad.pgm"
    p.write_bytes(data)
    with pytest.raises(PGMError):
        read_pgm(p)


def test_center_crop(tmp_path, capsys):
    img = np.arange(20 * 19, dtype=np.uint32).reshape(20, 19) % 256
    assert crop_to_blocks(img).shape == (16, 16)
    np.testing.assert_array_equal(crop_to_blocks(img), img[2:18, 1:17])
    p = tmp_path / "x.pgm"
    write_pgm(p, img.astype(np.uint8))
    assert load_plane(p).shape == (16, 16)
    assert "cropped" in capsys.readouterr().err
    with pytest.raises(PGMError):
        crop_to_blocks(np.zeros((7, 30)))
