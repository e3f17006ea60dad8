"""Matrix Market read/write for dense matrices and vectors (thin wrapper over scipy.io)."""
import os

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import ParseError


def write_matrix(path, M, fmt="array", comment=""):
    """Write ``M`` (vectors become n x 1) in ``array`` or ``coordinate`` format."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if fmt == "coordinate":
        M = sp.coo_matrix(M)
    elif fmt != "array":
        raise ValueError(f"unknown Matrix Market format {fmt!r}")
    scipy.io.mmwrite(os.fspath(path), M, comment=comment, precision=17)


def read_matrix(path):
    """Read a Matrix Market file as a dense float array; raises :class:`ParseError` on bad input."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such Matrix Market file: {path}")
    try:
        M = scipy.io.mmread(os.fspath(path))
    except Exception as exc:  # scipy raises ValueError, IndexError, ... on malformed content
        raise ParseError(f"cannot parse Matrix Market file {path}: {exc}") from exc
    if sp.issparse(M):
        M = M.toarray()
    M = np.asarray(M)
    if np.iscomplexobj(M):
        raise ParseError(f"{path}: complex matrices are not supported")
    M = M.astype(float)
    if not np.all(np.isfinite(M)):
        raise ParseError(f"{path}: non-finite entries")
    return M


def read_vector(path):
    v = read_matrix(path)
    if v.ndim == 2 and 1 in v.shape:
        return v.ravel()
    raise ParseError(f"{path}: expected a vector, got shape {v.shape}")
