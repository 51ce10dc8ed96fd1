"""FGRID and PGM/PPM round trips."""

import numpy as np
import pytest

from relprop.errors import ContractViolationError
from relprop.fgrid import read_fgrid, read_image, read_pgm, write_fgrid, write_pgm


def test_fgrid_round_trip_is_float32_exact(tmp_path):
    g = np.random.default_rng(0)
    arr = g.normal(size=(4, 5, 3)).astype("<f4").astype(np.float64)
    path = tmp_path / "t.fgrid"
    write_fgrid(path, arr)
    back = read_fgrid(path)
    np.testing.assert_array_equal(back, arr)
    assert back.shape == (4, 5, 3)


def test_fgrid_header_layout(tmp_path):
    path = tmp_path / "t.fgrid"
    write_fgrid(path, np.zeros((2, 3)))
    raw = path.read_bytes()
    assert raw.startswith(b"FGRID 1\n2 3\n")
    assert len(raw) == len(b"FGRID 1\n2 3\n") + 4 * 6


def test_fgrid_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(b"GRID 1\n2 2\n" + b"\x00" * 16)
    with pytest.raises(ContractViolationError):
        read_fgrid(path)


def test_fgrid_rejects_truncation(tmp_path):
    path = tmp_path / "short.fgrid"
    path.write_bytes(b"FGRID 1\n2 2\n" + b"\x00" * 8)
    with pytest.raises(ContractViolationError):
        read_fgrid(path)


def test_pgm_round_trip(tmp_path):
    grid = np.linspace(0.0, 1.0, 12).reshape(3, 4)
    path = tmp_path / "t.pgm"
    write_pgm(path, grid)
    back = read_pgm(path)
    assert back.shape == (3, 4)
    np.testing.assert_allclose(back, grid, atol=1.0 / 255.0)


def test_read_image_sniffs_formats(tmp_path):
    write_fgrid(tmp_path / "a.fgrid", np.ones((2, 2)))
    write_pgm(tmp_path / "a.pgm", np.ones((2, 2)))
    assert read_image(tmp_path / "a.fgrid").shape == (2, 2)
    assert read_image(tmp_path / "a.pgm").shape == (2, 2)
    (tmp_path / "junk").write_bytes(b"nothing here")
    with pytest.raises(ContractViolationError):
        read_image(tmp_path / "junk")
