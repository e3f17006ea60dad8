import numpy as np
import pytest

from tlhb.errors import ParseError
from tlhb.mmio import read_matrix, read_vector, write_matrix


@pytest.mark.parametrize("fmt", ["array", "coordinate"])
def test_round_trip_is_exact(tmp_path, fmt):
    M = np.random.default_rng(0).standard_normal((5, 3)) / 7
    write_matrix(tmp_path / "m.mtx", M, fmt=fmt)
    assert np.array_equal(read_matrix(tmp_path / "m.mtx"), M)


def test_symmetric_round_trip(tmp_path):
    A = np.array([[2.0, -1.0 / 3], [-1.0 / 3, 2.0]])
    write_matrix(tmp_path / "a.mtx", A)
    assert np.array_equal(read_matrix(tmp_path / "a.mtx"), A)


def test_vector(tmp_path):
    v = np.arange(4.0) / 3
    write_matrix(tmp_path / "v.mtx", v)
    assert np.array_equal(read_vector(tmp_path / "v.mtx"), v)
    write_matrix(tmp_path / "m.mtx", np.eye(2))
    with pytest.raises(ParseError):
        read_vector(tmp_path / "m.mtx")


def test_malformed(tmp_path):
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix array real general\n2 2\n1\nfoo\n")
    with pytest.raises(ParseError):
        read_matrix(bad)
    bad.write_text("not a matrix market file\n")
    with pytest.raises(ParseError):
        read_matrix(bad)
    with pytest.raises(FileNotFoundError):
        read_matrix(tmp_path / "missing.mtx")


def test_non_finite_rejected(tmp_path):
    bad = tmp_path / "nan.mtx"
    bad.write_text("%%MatrixMarket matrix array real general\n1 2\n1\nnan\n")
    with pytest.raises(ParseError):
        read_matrix(bad)
