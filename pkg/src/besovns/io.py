"""
Binary field (BNF1) and coefficient (BNC1) files plus JSON trajectory manifests.

BNF1: ASCII header ``BNF1 n N c grid\\n`` or ``BNF1 n N c spectral kmax\\n``
followed by little-endian float64 data in C order; spectral data interleave
real and imaginary parts.

BNC1: header ``BNC1 n J j_max\\n`` followed by blocks, each two little-endian
int32 (eps bitmask, j) and 2^{nj} float64 values.  The mean comes first as
the block (0, 0) with one value; detail bitmasks run 1..2^n-1.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .grid_field import GridField, SpectralField
from .meyer_wavelet import WaveletCoeffs
from .trajectory import Trajectory

__all__ = [
    "write_field",
    "read_field",
    "write_coeffs",
    "read_coeffs",
    "write_trajectory",
    "read_trajectory",
    "dumps_json",
]

_F8 = np.dtype("<f8")
_I4 = np.dtype("<i4")


def dumps_json(obj) -> str:
    """Canonical JSON used for every structured output."""
    return json.dumps(obj, sort_keys=True, allow_nan=True, separators=(", ", ": "))


def _read_header(raw: bytes, path) -> tuple[list[str], bytes]:
    nl = raw.find(b"\n")
    if nl < 0 or nl > 256:
        raise ValueError(f"{path}: missing header line")
    return raw[:nl].decode("ascii").split(), raw[nl + 1 :]


def write_field(path: Union[str, Path], F: Union[GridField, SpectralField]) -> None:
    path = Path(path)
    if isinstance(F, GridField):
        header = f"BNF1 {F.n} {F.N} {F.c} grid\n"
        payload = np.ascontiguousarray(F.data, dtype=_F8).tobytes()
    else:
        header = f"BNF1 {F.n} {F.N} {F.c} spectral {F.kmax}\n"
        payload = np.ascontiguousarray(F.data).view(np.float64).astype(_F8).tobytes()
    path.write_bytes(header.encode("ascii") + payload)


def read_field(path: Union[str, Path]) -> Union[GridField, SpectralField]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such field file: {path}")
    head, body = _read_header(path.read_bytes(), path)
    if len(head) < 5 or head[0] != "BNF1":
        raise ValueError(f"{path}: not a BNF1 file")
    n, N, c = (int(x) for x in head[1:4])
    kind = head[4]
    shape = (c,) + (N,) * n
    count = int(np.prod(shape))
    if kind == "grid":
        vals = np.frombuffer(body, dtype=_F8)
        if vals.size != count:
            raise ValueError(f"{path}: expected {count} values, found {vals.size}")
        return GridField(n, N, vals.reshape(shape).astype(np.float64))
    if kind == "spectral":
        if len(head) != 6:
            raise ValueError(f"{path}: spectral header needs kmax")
        vals = np.frombuffer(body, dtype=_F8)
        if vals.size != 2 * count:
            raise ValueError(f"{path}: expected {2 * count} values, found {vals.size}")
        data = vals.astype(np.float64).view(np.complex128).reshape(shape)
        return SpectralField(n, N, data, int(head[5]))
    raise ValueError(f"{path}: unknown field kind {kind!r}")


def write_coeffs(path: Union[str, Path], c: WaveletCoeffs) -> None:
    parts = [f"BNC1 {c.n} {c.J} {c.j_max}\n".encode("ascii")]
    parts.append(np.array([0, 0], dtype=_I4).tobytes() + np.array([c.base], dtype=_F8).tobytes())
    for j, band in c.bands():
        for e in range(band.shape[0]):
            parts.append(np.array([e + 1, j], dtype=_I4).tobytes())
            parts.append(np.ascontiguousarray(band[e], dtype=_F8).tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_coeffs(path: Union[str, Path]) -> WaveletCoeffs:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such coefficient file: {path}")
    head, body = _read_header(path.read_bytes(), path)
    if len(head) != 4 or head[0] != "BNC1":
        raise ValueError(f"{path}: not a BNC1 file")
    n, J, j_max = (int(x) for x in head[1:])
    out = WaveletCoeffs.zeros(n, J)
    if out.j_max != j_max:
        raise ValueError(f"{path}: j_max={j_max} inconsistent with J={J}")
    pos = 0
    while pos < len(body):
        mask, j = (int(x) for x in np.frombuffer(body[pos : pos + 8], dtype=_I4))
        pos += 8
        size = 1 if mask == 0 else 2 ** (n * j)
        vals = np.frombuffer(body[pos : pos + 8 * size], dtype=_F8)
        if vals.size != size:
            raise ValueError(f"{path}: truncated block ({mask}, {j})")
        pos += 8 * size
        if mask == 0:
            out.base = float(vals[0])
        elif 1 <= mask < 2**n and 0 <= j <= j_max:
            out.detail[j][mask - 1] = vals.reshape((2**j,) * n)
        else:
            raise ValueError(f"{path}: bad block tag ({mask}, {j})")
    return out


def write_trajectory(directory: Union[str, Path], stem: str, T: Trajectory) -> Path:
    """Write one spectral BNF1 file per stored time and a JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i in range(len(T.times)):
        name = f"{stem}_{i:04d}.bnf1"
        write_field(directory / name, T.field(i))
        files.append(name)
    manifest = {
        "format": "besovns-trajectory",
        "n": T.n,
        "N": T.N,
        "kmax": T.kmax,
        "ring_lo": T.ring_lo,
        "ring_hi": T.ring_hi,
        "samples_per_ring": T.samples_per_ring,
        "has_origin": T.has_origin,
        "times": [float(t) for t in T.times],
        "files": files,
    }
    path = directory / f"{stem}.json"
    path.write_text(dumps_json(manifest) + "\n")
    return path


def read_trajectory(path: Union[str, Path]) -> Trajectory:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such manifest: {path}")
    m = json.loads(path.read_text())
    if m.get("format") != "besovns-trajectory":
        raise ValueError(f"{path}: not a trajectory manifest")
    fields = [read_field(path.parent / name) for name in m["files"]]
    if any(not isinstance(F, SpectralField) for F in fields):
        raise ValueError(f"{path}: trajectory files must be spectral")
    data = np.stack([F.data for F in fields])
    return Trajectory(
        m["n"], m["N"], m["kmax"], m["ring_lo"], m["ring_hi"], m["samples_per_ring"],
        np.array(m["times"]), data, bool(m["has_origin"]),
    )
