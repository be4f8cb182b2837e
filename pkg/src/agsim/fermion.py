"""Jordan-Wigner encoding, Fermi-Hubbard terms, sparse Hamiltonians and exact diagonalization.

Conventions shared by every module:

* qubit ``q`` is bit ``n-1-q`` of a basis-state integer (qubit 0 is the most
  significant position);
* ``|1>`` is an occupied mode, so ``a^dagger = Z...Z (X - iY)/2``;
* ``a^dagger_m a_n`` on a basis state picks up ``(-1)`` to the number of
  occupied modes strictly between ``m`` and ``n`` along the chain.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import Lattice, Spin

DEFAULT_QUBIT_CAP = 24

PARTS = ("hop", "coulomb", "so")

SIGMA = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-qubit Pauli products: (a, b) -> (phase, c) with a @ b == phase * c
_PAULI_PRODUCT = {}
for _a, _b in itertools.product("IXYZ", repeat=2):
    _m = SIGMA[_a] @ SIGMA[_b]
    for _c in "IXYZ":
        _ph = np.trace(SIGMA[_c].conj().T @ _m) / 2
        if abs(_ph) > 0.5:
            _PAULI_PRODUCT[(_a, _b)] = (complex(np.round(_ph)), _c)


class CapacityError(RuntimeError):
    """Requested object would not fit the configured size cap."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Couplings:
    t: float = 1.0
    U: float = 0.0
    lam: float = 0.0


class PauliSum:
    """Symbolic linear combination of Pauli strings (dict string -> coefficient)."""

    def __init__(self, terms: dict[str, complex] | None = None, n: int | None = None):
        self.terms: dict[str, complex] = {}
        self.n = n
        for k, v in (terms or {}).items():
            self._add(k, v)

    def _add(self, key: str, value: complex) -> None:
        if self.n is None:
            self.n = len(key)
        elif len(key) != self.n:
            raise ValueError("Pauli strings of different lengths")
        self.terms[key] = self.terms.get(key, 0) + value

    @classmethod
    def identity(cls, n: int, coeff: complex = 1.0) -> "PauliSum":
        return cls({"I" * n: coeff})

    def __add__(self, other: "PauliSum") -> "PauliSum":
        out = PauliSum(dict(self.terms), self.n)
        for k, v in other.terms.items():
            out._add(k, v)
        return out

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + other * -1

    def __mul__(self, other) -> "PauliSum":
        if isinstance(other, PauliSum):
            out = PauliSum(n=self.n)
            for (ka, va), (kb, vb) in itertools.product(self.terms.items(), other.terms.items()):
                phase = 1 + 0j
                letters = []
                for a, b in zip(ka, kb):
                    ph, c = _PAULI_PRODUCT[(a, b)]
                    phase *= ph
                    letters.append(c)
                out._add("".join(letters), phase * va * vb)
            return out
        return PauliSum({k: v * other for k, v in self.terms.items()}, self.n)

    __rmul__ = __mul__

    def dagger(self) -> "PauliSum":
        return PauliSum({k: np.conj(v) for k, v in self.terms.items()}, self.n)

    def simplify(self, tol: float = 1e-12) -> "PauliSum":
        return PauliSum({k: v for k, v in self.terms.items() if abs(v) > tol}, self.n)

    def is_close(self, other: "PauliSum", tol: float = 1e-12) -> bool:
        diff = (self - other).simplify(tol)
        return not diff.terms

    def to_sparse(self) -> sp.csr_matrix:
        dim = 2**self.n
        out = sp.csr_matrix((dim, dim), dtype=complex)
        for key, coeff in self.simplify().terms.items():
            mat = sp.identity(1, dtype=complex, format="csr")
            for letter in key:
                mat = sp.kron(mat, sp.csr_matrix(SIGMA[letter]), format="csr")
            out = out + coeff * mat
        return out.tocsr()

    def __repr__(self) -> str:
        return f"PauliSum({len(self.terms)} terms, n={self.n})"


def jw_ladder(j: int, kind: str, n: int) -> PauliSum:
    """Jordan-Wigner image of a creation (``kind='create'``) or annihilation operator."""
    if not 0 <= j < n:
        raise IndexError(f"mode {j} outside 0..{n - 1}")
    if kind not in ("create", "annihilate"):
        raise ValueError(f"unknown ladder kind {kind!r}")
    prefix = "Z" * j
    suffix = "I" * (n - j - 1)
    sign = -1 if kind == "create" else 1
    return PauliSum({prefix + "X" + suffix: 0.5, prefix + "Y" + suffix: 0.5j * sign})


# --------------------------------------------------------------------------- terms


def rashba_matrix(vector: np.ndarray) -> np.ndarray:
    """2x2 spin matrix of ``(sigma x d)_z = sigma_x d_y - sigma_y d_x``."""
    dx, dy = vector
    return SIGMA["X"] * dy - SIGMA["Y"] * dx


def hopping_coefficient(lattice: Lattice, m: int, n: int, c: Couplings) -> complex:
    """Coefficient of ``a^dagger_m a_n`` in the kinetic part (hopping + Rashba).

    Zero when the two modes' sites are not bonded.
    """
    qmap = lattice.qubit_map
    i, si = qmap.mode(m)
    j, sj = qmap.mode(n)
    edge = lattice.edge_between(i, j)
    if edge is None:
        return 0.0
    if si == sj:
        return -c.t
    d = edge.vector if edge.a == i else -edge.vector
    return (2j / 3) * c.lam * rashba_matrix(d)[si, sj]


@dataclass(frozen=True)
class QuadraticTerm:
    """``coeff * a^dagger_m a_n + h.c.`` with ``m < n``."""

    m: int
    n: int
    coeff: complex
    kind: str  # "hop" or "so"
    edge: tuple[int, int]


def quadratic_terms(lattice: Lattice, c: Couplings, include: Iterable[str] = ("hop", "so")) -> list[QuadraticTerm]:
    include = set(include)
    qmap = lattice.qubit_map
    out = []
    for e in lattice.edges:
        for sa, sb in itertools.product(Spin, repeat=2):
            kind = "hop" if sa == sb else "so"
            if kind not in include:
                continue
            m, n = qmap.qubit(e.a, sa), qmap.qubit(e.b, sb)
            lo, hi = min(m, n), max(m, n)
            coeff = hopping_coefficient(lattice, lo, hi, c)
            out.append(QuadraticTerm(lo, hi, complex(coeff), kind, (e.a, e.b)))
    return out


def coulomb_pairs(lattice: Lattice) -> list[tuple[int, int]]:
    qmap = lattice.qubit_map
    return [(qmap.qubit(s.index, Spin.UP), qmap.qubit(s.index, Spin.DOWN)) for s in lattice.sites]


def single_particle_matrix(lattice: Lattice, c: Couplings) -> np.ndarray:
    """N_q x N_q matrix ``M`` with ``H_kin = sum M[m, n] a^dagger_m a_n``."""
    nq = lattice.n_qubits
    mat = np.zeros((nq, nq), dtype=complex)
    for term in quadratic_terms(lattice, c):
        mat[term.m, term.n] += term.coeff
        mat[term.n, term.m] += np.conj(term.coeff)
    return mat


def pauli_hamiltonian(lattice: Lattice, c: Couplings, include: Iterable[str] = PARTS) -> PauliSum:
    """Hamiltonian assembled symbolically from ``jw_ladder`` products."""
    include = set(include)
    n = lattice.n_qubits
    H = PauliSum(n=n)
    cre = [jw_ladder(j, "create", n) for j in range(n)]
    ann = [jw_ladder(j, "annihilate", n) for j in range(n)]
    for term in quadratic_terms(lattice, c, include & {"hop", "so"}):
        H = H + cre[term.m] * ann[term.n] * term.coeff
        H = H + cre[term.n] * ann[term.m] * np.conj(term.coeff)
    if "coulomb" in include:
        for up, dn in coulomb_pairs(lattice):
            H = H + (cre[up] * ann[up]) * (cre[dn] * ann[dn]) * c.U
    return H.simplify()


def format_pauli_terms(H: PauliSum) -> str:
    lines = []
    for key in sorted(H.terms):
        v = H.terms[key]
        lines.append(f"{v.real:+.17g} {v.imag:+.17g}j {key}")
    return "\n".join(lines)


# --------------------------------------------------------------------------- sparse


def popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x.astype(np.uint64)).astype(np.int64)


def sector_basis(n_qubits: int, n_particles: int | None) -> np.ndarray | None:
    """Sorted basis-state integers with fixed particle number (None for the full space)."""
    if n_particles is None:
        return None
    states = np.arange(2**n_qubits, dtype=np.int64)
    return states[popcount(states) == n_particles]


@dataclass(frozen=True)
class SparseHamiltonian:
    matrix: sp.csr_matrix
    n_qubits: int
    basis: np.ndarray | None = None  # sector basis, None = full 2^n space

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def restrict(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state)
        if self.basis is None or state.shape[0] == self.dim:
            if state.shape[0] != self.dim:
                raise ValueError(f"state of size {state.shape[0]} vs dimension {self.dim}")
            return state
        if state.shape[0] != 2**self.n_qubits:
            raise ValueError(f"state of size {state.shape[0]} vs 2^{self.n_qubits}")
        return state[self.basis]

    def embed(self, vec: np.ndarray) -> np.ndarray:
        if self.basis is None:
            return vec
        full = np.zeros(2**self.n_qubits, dtype=vec.dtype)
        full[self.basis] = vec
        return full

    def __add__(self, other: "SparseHamiltonian") -> "SparseHamiltonian":
        return SparseHamiltonian((self.matrix + other.matrix).tocsr(), self.n_qubits, self.basis)

    def scaled(self, factor: float) -> "SparseHamiltonian":
        return SparseHamiltonian((self.matrix * factor).tocsr(), self.n_qubits, self.basis)


def _bit(n_qubits: int, q: int) -> np.int64:
    return np.int64(1) << np.int64(n_qubits - 1 - q)


def _between_mask(n_qubits: int, m: int, n: int) -> np.int64:
    lo, hi = min(m, n), max(m, n)
    mask = np.int64(0)
    for q in range(lo + 1, hi):
        mask |= _bit(n_qubits, q)
    return mask


def build_hamiltonian(
    lattice: Lattice,
    c: Couplings,
    include: Iterable[str] = PARTS,
    n_particles: int | None = None,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> SparseHamiltonian:
    """Sparse JW matrix of the selected Hamiltonian parts.

    With ``n_particles`` set, the matrix is restricted to that particle-number
    sector (the Hamiltonian conserves particle number).
    """
    nq = lattice.n_qubits
    if nq > qubit_cap:
        raise CapacityError(
            f"{nq} qubits exceeds the exact-diagonalization cap of {qubit_cap}; use a circuit backend"
        )
    include = set(include)
    unknown = include - set(PARTS)
    if unknown:
        raise ValueError(f"unknown Hamiltonian parts {sorted(unknown)}")
    basis = sector_basis(nq, n_particles)
    states = basis if basis is not None else np.arange(2**nq, dtype=np.int64)
    dim = states.shape[0]

    def index_of(s: np.ndarray) -> np.ndarray:
        return s if basis is None else np.searchsorted(basis, s)

    rows, cols, vals = [], [], []
    for term in quadratic_terms(lattice, c, include & {"hop", "so"}):
        if term.coeff == 0:
            continue
        for (m, n, coeff) in ((term.m, term.n, term.coeff), (term.n, term.m, np.conj(term.coeff))):
            bm, bn = _bit(nq, m), _bit(nq, n)
            sel = ((states & bn) != 0) & ((states & bm) == 0)
            src = states[sel]
            dst = src ^ bm ^ bn
            sign = 1 - 2 * (popcount(src & _between_mask(nq, m, n)) & 1)
            rows.append(index_of(dst))
            cols.append(np.nonzero(sel)[0])
            vals.append(coeff * sign)
    if "coulomb" in include and c.U != 0:
        diag = np.zeros(dim)
        for up, dn in coulomb_pairs(lattice):
            both = _bit(nq, up) | _bit(nq, dn)
            diag += c.U * ((states & both) == both)
        idx = np.arange(dim)
        rows.append(idx)
        cols.append(idx)
        vals.append(diag.astype(complex))
    if rows:
        mat = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim), dtype=complex
        )
    else:
        mat = sp.csr_matrix((dim, dim), dtype=complex)
    mat.eliminate_zeros()
    return SparseHamiltonian(mat, nq, basis)


def number_operator(n_qubits: int) -> sp.csr_matrix:
    states = np.arange(2**n_qubits, dtype=np.int64)
    return sp.diags(popcount(states).astype(float)).tocsr()


# --------------------------------------------------------------------------- ED


def ground_state_ed(
    h: SparseHamiltonian, tol: float = 1e-8, maxiter: int | None = None, dense_below: int = 2500
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair.  The returned vector lives in ``h``'s basis (use ``h.embed``)."""
    if h.dim <= dense_below:
        w, v = np.linalg.eigh(h.matrix.toarray())
        energy, vec = float(w[0]), v[:, 0]
    else:
        try:
            w, v = spla.eigsh(h.matrix, k=1, which="SA", tol=1e-13, maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"eigensolver did not converge: {exc}") from exc
        energy, vec = float(w[0]), v[:, 0]
    vec = vec / np.linalg.norm(vec)
    residual = np.linalg.norm(h.matrix @ vec - energy * vec)
    if residual > tol:
        raise ConvergenceError(f"ground-state residual {residual:.3e} exceeds {tol:.1e}")
    return energy, vec


def expectation(h: SparseHamiltonian, state: np.ndarray) -> float:
    v = h.restrict(state)
    value = np.vdot(v, h.matrix @ v)
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise ValueError(f"non-Hermitian expectation value {value}")
    return float(value.real)
