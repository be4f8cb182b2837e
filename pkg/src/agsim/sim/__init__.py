"""Circuit execution backends sharing one contract.

Both :class:`StateVector` and :class:`MpsState` mutate in place and expose
``apply_two_qubit``, ``apply_single_qubit``, ``apply_fswap_layer``,
``probabilities``, ``sample``, ``to_dense`` and ``copy``.  The module-level
functions below are thin wrappers returning the state for chaining.
"""

from __future__ import annotations

import numpy as np

from .checkpoint import load_state, save_state
from .mps import MpsState
from .statevector import StateVector

__all__ = [
    "MpsState",
    "StateVector",
    "apply_single_qubit",
    "apply_two_qubit",
    "fidelity",
    "init_computational",
    "load_state",
    "overlap",
    "probabilities",
    "sample",
    "save_state",
]


def init_computational(n: int, bits, backend: str = "sv", chi_max: int = 64, precision: str = "double"):
    dtype = np.complex64 if precision == "single" else np.complex128
    if backend == "sv":
        return StateVector.computational(n, bits, dtype=dtype)
    if backend == "mps":
        return MpsState.computational(n, bits, chi_max=chi_max, dtype=dtype)
    raise ValueError(f"unknown backend {backend!r}")


def apply_two_qubit(state, gate, positions):
    p, q = positions
    state.apply_two_qubit(gate, p, q)
    return state


def apply_single_qubit(state, gate, position: int):
    state.apply_single_qubit(gate, position)
    return state


def probabilities(state, subset, max_subset: int = 8) -> np.ndarray:
    return state.probabilities(subset, max_subset=max_subset)


def _mps_inner(a: MpsState, b: MpsState) -> complex:
    env = np.ones((1, 1), dtype=complex)
    for ta, tb in zip(a.tensors, b.tensors):
        env = np.einsum("ab,aic,bid->cd", env, ta.conj(), tb)
    return complex(env[0, 0])


def overlap(a, b) -> complex:
    """``<a|b>`` for any pair of backend states (or raw amplitude vectors)."""
    na = a.n_qubits if hasattr(a, "n_qubits") else int(round(np.log2(len(a))))
    nb = b.n_qubits if hasattr(b, "n_qubits") else int(round(np.log2(len(b))))
    if na != nb:
        raise ValueError(f"states on {na} and {nb} qubits")
    if isinstance(a, MpsState) and isinstance(b, MpsState):
        return _mps_inner(a, b)
    va = a.to_dense() if hasattr(a, "to_dense") else np.asarray(a)
    vb = b.to_dense() if hasattr(b, "to_dense") else np.asarray(b)
    return complex(np.vdot(va, vb))


def fidelity(a, b) -> float:
    return abs(overlap(a, b)) ** 2


def sample(state, shots: int, seed: int | np.random.Generator | None = None) -> dict[str, int]:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return state.sample(shots, rng)
