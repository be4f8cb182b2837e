"""Slater-determinant ground states of the tight-binding Hamiltonian via Givens rotations.

The occupied orbitals ``b_k^dagger = sum_j Q[k, j] a_j^dagger`` are reduced to
``[D | 0]`` by nearest-neighbour column rotations.  Running the inverse
rotations on ``|1...10...0>`` rebuilds the determinant up to a global phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fermion import Couplings, single_particle_matrix
from .gates import Gate, format_gate_list
from .lattice import Lattice
from .sim import init_computational

ZERO_MODE_TOL = 1e-10


@dataclass(frozen=True)
class QuadraticHamiltonian:
    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.shape[0] != m.shape[1] or not np.allclose(m, m.conj().T, atol=1e-12):
            raise ValueError("single-particle matrix must be square and Hermitian")

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class OrbitalBasis:
    energies: np.ndarray  # ascending
    vectors: np.ndarray  # columns are orbitals
    occupied: tuple[int, ...]

    @property
    def ground_energy(self) -> float:
        return float(np.sum(self.energies[list(self.occupied)]))

    @property
    def occupied_matrix(self) -> np.ndarray:
        """Rows are occupied orbitals in the mode basis."""
        return self.vectors[:, list(self.occupied)].T


@dataclass(frozen=True)
class Rotation:
    position: int  # acts on chain positions (position, position + 1)
    theta: float
    phi: float
    matrix: np.ndarray  # 4x4, excitation preserving


@dataclass(frozen=True)
class GivensCircuit:
    n_modes: int
    occupation: str
    rotations: tuple[Rotation, ...]  # in application order

    @property
    def layers(self) -> list[list[Rotation]]:
        """ASAP layering; rotations on disjoint pairs share a layer."""
        free_at = [0] * (self.n_modes + 1)
        layers: list[list[Rotation]] = []
        for rot in self.rotations:
            p = rot.position
            depth = max(free_at[p], free_at[p + 1])
            if depth == len(layers):
                layers.append([])
            layers[depth].append(rot)
            free_at[p] = free_at[p + 1] = depth + 1
        return layers

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gates(self) -> list[Gate]:
        return [Gate(r.matrix, f"G(theta={r.theta:.17g},phi={r.phi:.17g})", (r.position, r.position + 1))
                for r in self.rotations]

    def export(self) -> str:
        header = f"# occupation {self.occupation}"
        return header + "\n" + format_gate_list(self.gates())


def quadratic_matrix(lattice: Lattice, t: float = 1.0, lam: float = 0.0) -> QuadraticHamiltonian:
    return QuadraticHamiltonian(single_particle_matrix(lattice, Couplings(t=t, U=0.0, lam=lam)))


def occupied_orbitals(q: QuadraticHamiltonian, include_zero_modes: bool = False) -> OrbitalBasis:
    energies, vectors = np.linalg.eigh(q.matrix)
    residual = np.linalg.norm(q.matrix @ vectors - vectors * energies)
    if residual > 1e-10 * max(1.0, np.abs(energies).max()):
        raise ArithmeticError(f"eigendecomposition residual {residual:.2e}")
    cutoff = ZERO_MODE_TOL if include_zero_modes else -ZERO_MODE_TOL
    occupied = tuple(int(k) for k in np.nonzero(energies < cutoff)[0])
    return OrbitalBasis(energies, vectors, occupied)


def _mode_rotation_gate(w: np.ndarray) -> np.ndarray:
    """Two-qubit image of the mode map ``a_j^dag -> sum_i w[i, j] a_i^dag`` on (upper, lower)."""
    g = np.zeros((4, 4), dtype=complex)
    g[0, 0] = 1.0
    g[1, 1], g[1, 2] = w[1, 1], w[1, 0]
    g[2, 1], g[2, 2] = w[0, 1], w[0, 0]
    g[3, 3] = np.linalg.det(w)
    return g


def givens_compile(basis: OrbitalBasis, tol: float = 1e-10) -> GivensCircuit:
    q = np.array(basis.occupied_matrix, dtype=complex)
    n_occ, n = q.shape
    gram = q @ q.conj().T
    if not np.allclose(gram, np.eye(n_occ), atol=1e-8):
        raise np.linalg.LinAlgError("occupied orbitals are not orthonormal (numerical degeneracy)")

    reductions: list[tuple[int, np.ndarray]] = []
    for k in range(n_occ):
        for j in range(n - 1, k, -1):
            x, y = q[k, j - 1], q[k, j]
            if abs(y) < tol * 1e-3:
                continue
            rho = np.hypot(abs(x), abs(y))
            g = np.array([[np.conj(x), -y], [np.conj(y), x]]) / rho
            q[:, [j - 1, j]] = q[:, [j - 1, j]] @ g
            reductions.append((j - 1, g))
        if abs(abs(q[k, k]) - 1) > 1e-8:
            raise np.linalg.LinAlgError("orbital matrix is rank deficient")

    rotations = []
    for p, g in reversed(reductions):
        w = np.conj(g)  # mode map undoing the column rotation
        mat = _mode_rotation_gate(w)
        theta = float(np.arccos(np.clip(abs(w[0, 0]), 0.0, 1.0)))
        phi = float(np.angle(w[1, 0]) - np.angle(w[0, 0])) if abs(w[1, 0]) > 0 else 0.0
        rotations.append(Rotation(p, theta, phi, mat))
    occupation = "1" * n_occ + "0" * (n - n_occ)
    return GivensCircuit(n, occupation, tuple(rotations))


def prepare(circuit: GivensCircuit, backend: str = "sv", chi_max: int = 64, precision: str = "double"):
    state = init_computational(circuit.n_modes, circuit.occupation, backend=backend, chi_max=chi_max,
                               precision=precision)
    for rot in circuit.rotations:
        state.apply_two_qubit(rot.matrix, rot.position, rot.position + 1)
    return state


def slater_amplitudes(q: np.ndarray) -> np.ndarray:
    """Dense amplitudes of ``prod_k b_k^dagger |0>`` by minors (independent oracle, small n)."""
    import itertools

    n_occ, n = q.shape
    amps = np.zeros(2**n, dtype=complex)
    for cols in itertools.combinations(range(n), n_occ):
        index = sum(1 << (n - 1 - c) for c in cols)
        amps[index] = np.linalg.det(q[:, list(cols)])
    return amps


def tight_binding_state(lattice: Lattice, t: float = 1.0, lam: float = 0.0, backend: str = "sv",
                        chi_max: int = 64, include_zero_modes: bool = False, precision: str = "double"):
    """Convenience wrapper: orbitals, circuit and prepared state of the TB ground state."""
    basis = occupied_orbitals(quadratic_matrix(lattice, t, lam), include_zero_modes)
    circuit = givens_compile(basis)
    return basis, circuit, prepare(circuit, backend, chi_max, precision)
