"""Binary state checkpoints.

Layout (little endian)::

    magic      8 bytes   b"AGSIMSV1" or b"AGSIMMP1"
    n_qubits   uint32
    precision  uint8     0 = complex128, 1 = complex64
    -- statevector --
    amplitudes 2^n complex values
    -- mps --
    chi_max    uint32
    center     uint32
    ledger     float64
    per tensor: three uint32 dims followed by the raw tensor data
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .mps import MpsState
from .statevector import StateVector

SV_MAGIC = b"AGSIMSV1"
MPS_MAGIC = b"AGSIMMP1"
_DTYPES = {0: np.dtype("<c16"), 1: np.dtype("<c8")}


def _precision_flag(dtype) -> int:
    return 1 if np.dtype(dtype) == np.complex64 else 0


def save_state(state, path) -> None:
    path = Path(path)
    flag = _precision_flag(state.dtype)
    dt = _DTYPES[flag]
    with path.open("wb") as fh:
        if isinstance(state, StateVector):
            fh.write(SV_MAGIC)
            fh.write(struct.pack("<IB", state.n_qubits, flag))
            fh.write(state.amplitudes.astype(dt, copy=False).tobytes())
        elif isinstance(state, MpsState):
            fh.write(MPS_MAGIC)
            fh.write(struct.pack("<IB", state.n_qubits, flag))
            fh.write(struct.pack("<IId", state.chi_max, state.center, state.fidelity_ledger))
            for t in state.tensors:
                fh.write(struct.pack("<III", *t.shape))
                fh.write(np.ascontiguousarray(t).astype(dt, copy=False).tobytes())
        else:
            raise TypeError(f"cannot checkpoint {type(state).__name__}")


def load_state(path):
    data = Path(path).read_bytes()
    magic = data[:8]
    n, flag = struct.unpack_from("<IB", data, 8)
    off = 13
    dt = _DTYPES[flag]
    if magic == SV_MAGIC:
        amps = np.frombuffer(data, dtype=dt, count=2**n, offset=off).astype(dt.newbyteorder("="))
        return StateVector(amps, n)
    if magic == MPS_MAGIC:
        chi, center, ledger = struct.unpack_from("<IId", data, off)
        off += 16
        tensors = []
        for _ in range(n):
            shape = struct.unpack_from("<III", data, off)
            off += 12
            count = int(np.prod(shape))
            t = np.frombuffer(data, dtype=dt, count=count, offset=off).reshape(shape)
            tensors.append(t.astype(dt.newbyteorder("=")))
            off += count * dt.itemsize
        return MpsState(tensors, chi, center, ledger)
    raise ValueError(f"unrecognised checkpoint header {magic!r}")
