"""Binary ``PEQ1`` snapshots of a velocity state.

Layout, little-endian throughout::

    b"PEQ1"                  magic
    u32 version = 1
    u32 nx, ny, nz
    f64 lx, ly, h
    f64 time
    u32 field_count = 2
    per field:
        u8 parity            0 = COS, 1 = SIN
        nx*ny*nz complex     (f64 re, f64 im); n outermost, then m2, m1 innermost

Horizontal indices use FFT frequency ordering.  The round trip is exact at
the byte level.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import State
from .spectral_basis import GridSpec, Parity, SpectralField

__all__ = ["SnapshotError", "SnapshotHeader", "read_snapshot", "read_snapshot_header", "write_snapshot"]

MAGIC = b"PEQ1"
VERSION = 1
_HEADER = struct.Struct("<4sIIII4dI")
_COMPLEX = np.dtype("<c16")


class SnapshotError(ValueError):
    """A snapshot file is malformed, truncated or incompatible."""


@dataclass(frozen=True)
class SnapshotHeader:
    version: int
    grid: GridSpec
    time: float
    field_count: int
    parities: tuple[Parity, ...]


def _encode(state: State) -> bytes:
    g = state.grid
    parts = [_HEADER.pack(MAGIC, VERSION, g.nx, g.ny, g.nz, g.lx, g.ly, g.h, state.time, 2)]
    for fld in (state.u, state.v):
        parts.append(struct.pack("<B", fld.parity.value))
        # (m1, m2, n) -> n outermost, m1 innermost
        parts.append(np.ascontiguousarray(fld.coeffs.transpose(2, 1, 0), dtype=_COMPLEX).tobytes())
    return b"".join(parts)


def write_snapshot(state: State, path: str | os.PathLike) -> None:
    """Write ``state`` atomically (temporary file, then rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(_encode(state))
    os.replace(tmp, path)


def _parse_header(data: bytes) -> SnapshotHeader:
    if len(data) < 4 or data[:4] != MAGIC:
        raise SnapshotError(f"bad magic {data[:4]!r}; not a PEQ1 snapshot")
    if len(data) < _HEADER.size:
        raise SnapshotError("truncated snapshot header")
    _, version, nx, ny, nz, lx, ly, h, time, count = _HEADER.unpack_from(data)
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    if count != 2:
        raise SnapshotError(f"expected 2 fields, header declares {count}")
    try:
        grid = GridSpec(lx=lx, ly=ly, h=h, nx=nx, ny=ny, nz=nz)
    except ValueError as exc:
        raise SnapshotError(f"invalid grid in header: {exc}") from None
    block = nx * ny * nz * _COMPLEX.itemsize
    parities = []
    offset = _HEADER.size
    for i in range(count):
        if len(data) < offset + 1:
            raise SnapshotError(f"truncated snapshot: field {i} missing")
        code = data[offset]
        try:
            parities.append(Parity(code))
        except ValueError:
            raise SnapshotError(f"invalid parity code {code} for field {i}") from None
        offset += 1 + block
    if len(data) < offset:
        raise SnapshotError(f"truncated snapshot: expected {offset} bytes, found {len(data)}")
    if len(data) > offset:
        raise SnapshotError(f"trailing bytes: expected {offset}, found {len(data)}")
    return SnapshotHeader(version, grid, time, count, tuple(parities))


def read_snapshot_header(path: str | os.PathLike) -> SnapshotHeader:
    return _parse_header(Path(path).read_bytes())


def read_snapshot(path: str | os.PathLike, grid: GridSpec | None = None) -> State:
    """Load a snapshot; with ``grid`` given, a differing grid is an error."""
    data = Path(path).read_bytes()
    header = _parse_header(data)
    g = header.grid
    if grid is not None and grid != g:
        raise SnapshotError(f"snapshot grid {g} does not match the run grid {grid}")
    if any(p is not Parity.COS for p in header.parities):
        raise SnapshotError("velocity snapshots must hold COS fields")
    count = g.nx * g.ny * g.nz
    offset = _HEADER.size
    fields_ = []
    for parity in header.parities:
        offset += 1
        raw = np.frombuffer(data, dtype=_COMPLEX, count=count, offset=offset)
        offset += count * _COMPLEX.itemsize
        coeffs = raw.reshape(g.nz, g.ny, g.nx).transpose(2, 1, 0).astype(complex)
        fields_.append(SpectralField(coeffs, parity, g))
    return State(fields_[0], fields_[1], header.time)
