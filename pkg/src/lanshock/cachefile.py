"""Binary cache files for assembled collision tensors.

Header layout (little endian):  magic b"LSHK1" | uint32 N_v | uint32 n_q |
float64 kappa | uint32 ndim | uint32 dims[ndim] | float64 payload.
The header fields are validated on load so a parameter change can never
silently reuse a stale cache.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"LSHK1"


class CacheMismatch(RuntimeError):
    pass


def write_array(path: str | Path, arr: np.ndarray, N_v: int, n_q: int, kappa: float):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", N_v, n_q))
        fh.write(struct.pack("<d", float(kappa)))
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def read_array(path: str | Path, N_v: int, n_q: int, kappa: float) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(5) != MAGIC:
            raise CacheMismatch(f"{path}: bad magic")
        nv, nq = struct.unpack("<II", fh.read(8))
        (kap,) = struct.unpack("<d", fh.read(8))
        if (nv, nq) != (N_v, n_q) or kap != float(kappa):
            raise CacheMismatch(
                f"{path}: header (N_v={nv}, n_q={nq}, kappa={kap}) does not match "
                f"request (N_v={N_v}, n_q={n_q}, kappa={kappa})"
            )
        (ndim,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(dims).copy()
