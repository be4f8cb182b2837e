"""Dense statevector backend (qubit 0 = most significant bit)."""

from __future__ import annotations

import numpy as np

from ..gates import Gate


def _matrix(gate) -> np.ndarray:
    return gate.matrix if isinstance(gate, Gate) else np.asarray(gate)


class StateVector:
    backend = "sv"
    PERM_CACHE_SIZE = 16
    PERM_CACHE_BYTES = 256 * 2**20

    def __init__(self, amplitudes: np.ndarray, n_qubits: int | None = None):
        amplitudes = np.asarray(amplitudes)
        if amplitudes.dtype not in (np.complex64, np.complex128):
            amplitudes = amplitudes.astype(np.complex128)
        n = int(round(np.log2(amplitudes.size))) if n_qubits is None else n_qubits
        if amplitudes.shape != (2**n,):
            raise ValueError(f"expected {2**n} amplitudes, got shape {amplitudes.shape}")
        self.n_qubits = n
        self.amplitudes = amplitudes
        self._perm_cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}

    @classmethod
    def computational(cls, n: int, bits: str | list[int], dtype=np.complex128) -> "StateVector":
        bits = [int(b) for b in bits]
        if len(bits) != n:
            raise ValueError(f"bitstring of length {len(bits)} for {n} qubits")
        index = int("".join(map(str, bits)), 2) if n else 0
        amp = np.zeros(2**n, dtype=dtype)
        amp[index] = 1.0
        return cls(amp, n)

    @property
    def dtype(self):
        return self.amplitudes.dtype

    def copy(self) -> "StateVector":
        out = StateVector(self.amplitudes.copy(), self.n_qubits)
        out._perm_cache = self._perm_cache
        return out

    def to_dense(self) -> np.ndarray:
        return self.amplitudes

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def apply_two_qubit(self, gate, p: int, q: int | None = None) -> None:
        q = p + 1 if q is None else q
        if q != p + 1 or not 0 <= p < self.n_qubits - 1:
            raise ValueError(f"two-qubit gates act on adjacent positions, got ({p}, {q})")
        g = _matrix(gate).astype(self.dtype, copy=False)
        psi = self.amplitudes.reshape(2**p, 4, -1)
        self.amplitudes = np.matmul(g, psi).reshape(-1)

    def apply_single_qubit(self, gate, p: int) -> None:
        if not 0 <= p < self.n_qubits:
            raise ValueError(f"qubit {p} out of range")
        g = _matrix(gate).astype(self.dtype, copy=False)
        psi = self.amplitudes.reshape(2**p, 2, -1)
        self.amplitudes = np.matmul(g, psi).reshape(-1)

    def _remember(self, key, value) -> None:
        while self._perm_cache and (
            len(self._perm_cache) >= self.PERM_CACHE_SIZE
            or sum(v[0].nbytes + v[1].nbytes for v in self._perm_cache.values()) > self.PERM_CACHE_BYTES
        ):
            self._perm_cache.pop(next(iter(self._perm_cache)))
        self._perm_cache[key] = value

    def _fswap_permutation(self, pairs: tuple[tuple[int, int], ...]):
        cached = self._perm_cache.get(pairs)
        if cached is not None:
            return cached
        n = self.n_qubits
        idx = np.arange(2**n, dtype=np.int64)
        src = idx.copy()
        negative = np.zeros(idx.shape, dtype=bool)
        for p, q in pairs:
            bp, bq = n - 1 - p, n - 1 - q
            vp, vq = (idx >> bp) & 1, (idx >> bq) & 1
            src ^= ((vp ^ vq) << bp) | ((vp ^ vq) << bq)
            negative ^= (vp & vq).astype(bool)
        value = (src.astype(np.int32 if n < 31 else np.int64), negative)
        self._remember(pairs, value)
        return value

    @staticmethod
    def _check_layer(pairs) -> tuple[tuple[int, int], ...]:
        pairs = tuple(sorted(tuple(p) for p in pairs))
        used = [q for pair in pairs for q in pair]
        if len(set(used)) != len(used) or any(q != p + 1 for p, q in pairs):
            raise ValueError(f"fswap layer must hold disjoint adjacent pairs: {pairs}")
        return pairs

    def _permute(self, src: np.ndarray, negative: np.ndarray) -> None:
        out = self.amplitudes[src]
        np.negative(out, out=out, where=negative)
        self.amplitudes = out

    def apply_fswap_layer(self, pairs) -> None:
        """All fermionic swaps of a layer as one signed permutation of amplitudes."""
        pairs = self._check_layer(pairs)
        if pairs:
            self._permute(*self._fswap_permutation(pairs))

    def apply_fswap_layers(self, layers) -> None:
        """A whole fswap network folded into a single cached signed permutation."""
        key = ("network",) + tuple(self._check_layer(layer) for layer in layers)
        cached = self._perm_cache.get(key)
        if cached is None:
            src = np.arange(2**self.n_qubits, dtype=np.int32 if self.n_qubits < 31 else np.int64)
            negative = np.zeros(src.shape, dtype=bool)
            for layer in key[1:]:
                if layer:
                    s2, n2 = self._fswap_permutation(layer)
                    src, negative = src[s2], negative[s2] ^ n2
            cached = (src, negative)
            self._remember(key, cached)
        self._permute(*cached)

    def probabilities(self, subset, max_subset: int = 8) -> np.ndarray:
        subset = list(subset)
        if len(subset) > max_subset:
            raise ValueError(f"subset of {len(subset)} qubits exceeds the enumeration cap {max_subset}")
        probs = np.abs(self.amplitudes) ** 2
        if len(subset) == 2 and subset[1] == subset[0] + 1:
            p = subset[0]
            return probs.reshape(2**p, 4, -1).sum(axis=(0, 2))
        tensor = probs.reshape((2,) * self.n_qubits)
        others = tuple(q for q in range(self.n_qubits) if q not in subset)
        marg = tensor.sum(axis=others)
        # remaining axes are in ascending qubit order; reorder to the request
        order = np.argsort(np.argsort(subset))
        marg = np.transpose(marg, order) if len(subset) > 1 else marg
        return marg.reshape(-1)

    def sample(self, shots: int, rng: np.random.Generator) -> dict[str, int]:
        probs = np.abs(self.amplitudes.astype(np.complex128)) ** 2
        probs /= probs.sum()
        draws = rng.choice(probs.size, size=shots, p=probs)
        values, counts = np.unique(draws, return_counts=True)
        return {format(int(v), f"0{self.n_qubits}b"): int(c) for v, c in zip(values, counts)}
