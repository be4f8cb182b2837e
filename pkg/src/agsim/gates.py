"""Two-qubit evolution gates, the fermionic swap and the measurement diagonalizer.

Two-qubit matrices use the basis ``|00>, |01>, |10>, |11>`` with the first
(upper) chain position as the most significant bit.  For modes ``m`` at the
upper position and ``n`` at the lower one, ``a^dagger_m a_n = |10><01|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fermion import SIGMA


@dataclass(frozen=True)
class Gate:
    matrix: np.ndarray
    label: str
    targets: tuple[int, ...] = ()

    def on(self, *targets: int) -> "Gate":
        return Gate(self.matrix, self.label, tuple(targets))

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.matrix.shape[0])))

    def dagger(self) -> "Gate":
        return Gate(self.matrix.conj().T, self.label + "^dag", self.targets)


def _block(a: complex, b: complex, c: complex, d: complex, corner: complex = 1.0) -> np.ndarray:
    """Excitation-preserving 4x4 with ``[[a, b], [c, d]]`` on (|01>, |10>)."""
    g = np.zeros((4, 4), dtype=complex)
    g[0, 0] = 1.0
    g[1, 1], g[1, 2], g[2, 1], g[2, 2] = a, b, c, d
    g[3, 3] = corner
    return g


def u_coulomb(theta: float, U: float) -> Gate:
    g = np.eye(4, dtype=complex)
    g[3, 3] = np.exp(-1j * U * theta)
    return Gate(g, f"UC(theta={theta:.17g},U={U:.17g})")


def hop_generator() -> np.ndarray:
    h = np.zeros((4, 4), dtype=complex)
    h[1, 2] = h[2, 1] = 1.0
    return h


def u_hop(theta: float, t: float) -> Gate:
    """``exp(-i t theta h_H)`` with ``h_H = |01><10| + |10><01|``."""
    c, s = np.cos(t * theta), np.sin(t * theta)
    return Gate(_block(c, -1j * s, -1j * s, c), f"UH(theta={theta:.17g},t={t:.17g})")


def so_generator(phi: float) -> np.ndarray:
    """Unit-strength Rashba pair generator whose exponential is ``u_so``."""
    h = np.zeros((4, 4), dtype=complex)
    h[1, 2] = -1j * np.exp(1j * phi)
    h[2, 1] = 1j * np.exp(-1j * phi)
    return h


def u_so(theta: float, lam: float, phi: float) -> Gate:
    """``exp(-i (2/3) lam theta so_generator(phi))``."""
    a = 2.0 * lam * theta / 3.0
    c, s = np.cos(a), np.sin(a)
    return Gate(
        _block(c, -np.exp(1j * phi) * s, np.exp(-1j * phi) * s, c),
        f"USO(theta={theta:.17g},lam={lam:.17g},phi={phi:.17g})",
    )


def fswap() -> Gate:
    return Gate(_block(0, 1, 1, 0, corner=-1), "FSWAP")


def pair_gate(coeff: complex, theta: float) -> Gate:
    """``exp(-i theta (coeff a^dag_m a_n + h.c.))`` for modes (m, n) on (upper, lower).

    Real couplings give a ``u_hop``; complex ones a ``u_so``.
    """
    if abs(coeff) == 0:
        return Gate(np.eye(4, dtype=complex), "I")
    if abs(np.imag(coeff)) < 1e-15 * abs(coeff):
        return u_hop(theta, float(np.real(coeff)))
    # coeff = (2/3) lam * i * exp(-i phi) with lam = 3|coeff|/2
    lam = 1.5 * abs(coeff)
    phi = float(-np.angle(coeff / 1j))
    return u_so(theta, lam, phi)


def _controlled(u: np.ndarray, control: int) -> np.ndarray:
    p0 = np.diag([1, 0]).astype(complex)
    p1 = np.diag([0, 1]).astype(complex)
    eye = np.eye(2, dtype=complex)
    if control == 0:
        return np.kron(p0, eye) + np.kron(p1, u)
    return np.kron(eye, p0) + np.kron(u, p1)


def cnot(control: int = 0) -> Gate:
    return Gate(_controlled(SIGMA["X"], control), f"CNOT(c={control})")


def controlled_hadamard(control: int = 0) -> Gate:
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    return Gate(_controlled(h, control), f"CH(c={control})")


def diagonalizer() -> Gate:
    """CNOT . CH . CNOT taking ``(|01> + |10>)/sqrt2 -> |10>`` and ``(|01> - |10>)/sqrt2 -> |01>``.

    Hence ``<|10><01| + |01><10|> = P10 - P01`` after the gate.
    """
    cx = cnot(control=1).matrix
    ch = controlled_hadamard(control=0).matrix
    return Gate(cx @ ch @ cx, "D")


def so_prerotation(phi: float) -> Gate:
    """Single-qubit phase ``diag(1, exp(-i phi))`` for the upper qubit of a pair."""
    return Gate(np.diag([1.0, np.exp(-1j * phi)]).astype(complex), f"P(phi={phi:.17g})")


def is_unitary(g: Gate | np.ndarray, tol: float = 1e-12) -> bool:
    m = g.matrix if isinstance(g, Gate) else g
    return np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=tol)


def format_gate_list(gates) -> str:
    """One gate per line: label, target positions, row-major matrix entries."""
    lines = []
    for g in gates:
        entries = " ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in np.asarray(g.matrix).ravel())
        targets = ",".join(str(t) for t in g.targets)
        lines.append(f"{g.label}\t{targets}\t{entries}")
    return "\n".join(lines)


def parse_gate_list(text: str) -> list[Gate]:
    gates = []
    for line in text.splitlines():
        if not line.strip():
            continue
        label, targets, entries = line.split("\t")
        vals = np.array([complex(e) for e in entries.split()], dtype=complex)
        dim = int(round(np.sqrt(vals.size)))
        tgt = tuple(int(t) for t in targets.split(",")) if targets else ()
        gates.append(Gate(vals.reshape(dim, dim), label, tgt))
    return gates
