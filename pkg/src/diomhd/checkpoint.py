"""Binary checkpoints of a :class:`PerturbationState`.

Layout (little-endian): magic ``b"MHDT"``, ``u32`` version, ``u32`` n,
``f64`` time, then for each of ``a, u1, u2, u3, h1, h2, h3`` the ``n**3``
complex coefficients as interleaved ``f64`` pairs.  Coefficients are listed
row-major with every wave-number axis ascending from ``-n/2`` to ``n/2 - 1``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral import Grid3
from .state import PerturbationState

MAGIC = b"MHDT"
VERSION = 1
_HEADER = struct.Struct("<4sIId")


class CheckpointError(ValueError):
    """Malformed or incompatible checkpoint data."""


def _reorder(stack: np.ndarray, index: np.ndarray) -> np.ndarray:
    return stack[:, index][:, :, index][:, :, :, index]


def dumps(state: PerturbationState) -> bytes:
    grid = state.grid
    idx = grid.shifted_index()
    body = np.ascontiguousarray(_reorder(state.stack(), idx)).astype("<c16")
    return _HEADER.pack(MAGIC, VERSION, grid.n, float(state.time)) + body.tobytes()


def loads(data: bytes) -> PerturbationState:
    if len(data) < _HEADER.size:
        raise CheckpointError("truncated header")
    magic, version, n, time = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}")
    grid = Grid3(int(n))
    expected = _HEADER.size + 7 * n**3 * 16
    if len(data) != expected:
        raise CheckpointError(f"expected {expected} bytes for n={n}, got {len(data)}")
    body = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape((7,) + grid.shape)
    inv = np.argsort(grid.shifted_index())
    return PerturbationState.from_stack(grid, _reorder(body, inv).astype(np.complex128), time)


def write_checkpoint(path, state: PerturbationState) -> Path:
    path = Path(path)
    path.write_bytes(dumps(state))
    return path


def read_checkpoint(path) -> PerturbationState:
    return loads(Path(path).read_bytes())
