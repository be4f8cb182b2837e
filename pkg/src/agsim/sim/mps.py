"""Matrix product state backend with a fixed maximum bond dimension.

Tensors have shape ``(left, 2, right)``.  A single orthogonality center is
kept and moved to each gate before it is applied, so every SVD truncation is
locally optimal.  ``fidelity_ledger`` multiplies the kept squared
singular-value weight of every truncation.
"""

from __future__ import annotations

import numpy as np

from ..gates import Gate

# singular values below this fraction of the largest are numerical zeros
RANK_RTOL = 1e-14


def _matrix(gate) -> np.ndarray:
    return gate.matrix if isinstance(gate, Gate) else np.asarray(gate)


class MpsState:
    backend = "mps"

    def __init__(self, tensors: list[np.ndarray], chi_max: int, center: int = 0, fidelity_ledger: float = 1.0):
        if chi_max < 1:
            raise ValueError("chi_max must be >= 1")
        self.tensors = [np.asarray(t) for t in tensors]
        self.n_qubits = len(self.tensors)
        self.chi_max = int(chi_max)
        self.center = center
        self.fidelity_ledger = float(fidelity_ledger)
        self.truncations = 0

    @classmethod
    def computational(cls, n: int, bits, chi_max: int = 64, dtype=np.complex128) -> "MpsState":
        bits = [int(b) for b in bits]
        if len(bits) != n:
            raise ValueError(f"bitstring of length {len(bits)} for {n} qubits")
        tensors = []
        for b in bits:
            t = np.zeros((1, 2, 1), dtype=dtype)
            t[0, b, 0] = 1.0
            tensors.append(t)
        return cls(tensors, chi_max)

    @classmethod
    def from_dense(cls, amplitudes: np.ndarray, chi_max: int | None = None) -> "MpsState":
        n = int(round(np.log2(amplitudes.size)))
        chi_max = chi_max or 2 ** (n // 2)
        tensors = []
        rest = np.asarray(amplitudes, dtype=np.complex128).reshape(1, -1)
        for _ in range(n - 1):
            left = rest.shape[0]
            rest = rest.reshape(left * 2, -1)
            q, r = np.linalg.qr(rest)
            tensors.append(q.reshape(left, 2, -1))
            rest = r
        tensors.append(rest.reshape(rest.shape[0], 2, 1))
        return cls(tensors, chi_max, center=n - 1)

    @property
    def dtype(self):
        return self.tensors[0].dtype

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "MpsState":
        out = MpsState([t.copy() for t in self.tensors], self.chi_max, self.center, self.fidelity_ledger)
        out.truncations = self.truncations
        return out

    # ------------------------------------------------------------ canonical form

    def move_center(self, target: int) -> None:
        while self.center < target:
            k = self.center
            a = self.tensors[k]
            l, d, r = a.shape
            q, rr = np.linalg.qr(a.reshape(l * d, r))
            self.tensors[k] = q.reshape(l, d, -1)
            self.tensors[k + 1] = np.tensordot(rr, self.tensors[k + 1], axes=(1, 0))
            self.center += 1
        while self.center > target:
            k = self.center
            a = self.tensors[k]
            l, d, r = a.shape
            q, rr = np.linalg.qr(a.reshape(l, d * r).T)
            self.tensors[k] = q.T.reshape(-1, d, r)
            self.tensors[k - 1] = np.tensordot(self.tensors[k - 1], rr.T, axes=(2, 0))
            self.center -= 1

    # ------------------------------------------------------------------- gates

    def apply_single_qubit(self, gate, p: int) -> None:
        if not 0 <= p < self.n_qubits:
            raise ValueError(f"qubit {p} out of range")
        g = _matrix(gate).astype(self.dtype, copy=False)
        self.tensors[p] = np.einsum("ij,ljr->lir", g, self.tensors[p])

    def apply_two_qubit(self, gate, p: int, q: int | None = None) -> None:
        q = p + 1 if q is None else q
        if q != p + 1 or not 0 <= p < self.n_qubits - 1:
            raise ValueError(f"two-qubit gates act on adjacent positions, got ({p}, {q})")
        if self.center < p:
            self.move_center(p)
        elif self.center > p + 1:
            self.move_center(p + 1)
        g = _matrix(gate).astype(self.dtype, copy=False).reshape(2, 2, 2, 2)
        a, b = self.tensors[p], self.tensors[p + 1]
        l, r = a.shape[0], b.shape[2]
        theta = np.tensordot(a, b, axes=(2, 0))  # l, i, j, r
        theta = np.einsum("abij,lijr->labr", g, theta).reshape(l * 2, 2 * r)
        u, s, vh = np.linalg.svd(theta, full_matrices=False)
        total = float(np.sum(s**2))
        rank = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 1
        keep = max(1, min(self.chi_max, rank))
        if keep < rank:
            self.truncations += 1
        kept = float(np.sum(s[:keep] ** 2))
        if total > 0:
            self.fidelity_ledger *= min(1.0, kept / total)
        u, s, vh = u[:, :keep], s[:keep], vh[:keep]
        s = s / np.sqrt(kept)
        # the center follows the gate direction: left block keeps U, right gets S V^dag
        if self.center <= p:
            self.tensors[p] = u.reshape(l, 2, keep)
            self.tensors[p + 1] = (s[:, None] * vh).reshape(keep, 2, r)
            self.center = p + 1
        else:
            self.tensors[p] = (u * s[None, :]).reshape(l, 2, keep)
            self.tensors[p + 1] = vh.reshape(keep, 2, r)
            self.center = p

    def apply_fswap_layer(self, pairs) -> None:
        from ..gates import fswap

        g = fswap().matrix
        pairs = sorted(tuple(p) for p in pairs)
        if pairs and self.center > (pairs[0][0] + pairs[-1][0]) / 2:
            pairs.reverse()
        for p, q in pairs:
            self.apply_two_qubit(g, p, q)

    def apply_fswap_layers(self, layers) -> None:
        for layer in layers:
            self.apply_fswap_layer(layer)

    # --------------------------------------------------------------- readout

    def to_dense(self) -> np.ndarray:
        out = self.tensors[0].reshape(2, -1)
        for t in self.tensors[1:]:
            out = np.tensordot(out, t, axes=(1, 0)).reshape(-1, t.shape[2])
        return out.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensors[self.center]))

    def probabilities(self, subset, max_subset: int = 8) -> np.ndarray:
        subset = list(subset)
        if len(subset) > max_subset:
            raise ValueError(f"subset of {len(subset)} qubits exceeds the enumeration cap {max_subset}")
        lo, hi = min(subset), max(subset)
        if hi - lo + 1 <= max_subset:
            # contiguous window around the center: contract the block directly
            self.move_center(lo)
            block = self.tensors[lo]
            for k in range(lo + 1, hi + 1):
                block = np.tensordot(block, self.tensors[k], axes=(-1, 0))
            probs = np.sum(np.abs(block) ** 2, axis=(0, block.ndim - 1))
            window = list(range(lo, hi + 1))
            keep_axes = [window.index(q) for q in subset]
            drop = tuple(i for i in range(len(window)) if i not in keep_axes)
            marg = probs.sum(axis=drop) if drop else probs
            order = np.argsort(np.argsort(subset))
            marg = np.transpose(marg, order) if len(subset) > 1 else marg
            return marg.reshape(-1)
        # general case: transfer environments keyed by partial outcome
        self.move_center(0)
        envs = {(): np.ones((1, 1), dtype=self.dtype)}
        for k, t in enumerate(self.tensors):
            new = {}
            for key, env in envs.items():
                if k in subset:
                    for b in (0, 1):
                        tb = t[:, b, :]
                        new[key + (b,)] = tb.conj().T @ env @ tb
                else:
                    new[key] = np.einsum("ab,aic,bid->cd", env, t.conj(), t)
            envs = new
        probs = np.zeros((2,) * len(subset))
        for key, env in envs.items():
            probs[key] = env[0, 0].real
        order = np.argsort(np.argsort(subset))
        return np.transpose(probs, order).reshape(-1) if len(subset) > 1 else probs.reshape(-1)

    def sample(self, shots: int, rng: np.random.Generator) -> dict[str, int]:
        self.move_center(0)
        vecs = np.ones((shots, 1), dtype=self.dtype)
        bits = np.zeros((shots, self.n_qubits), dtype=np.int8)
        for k, t in enumerate(self.tensors):
            w0 = vecs @ t[:, 0, :]
            w1 = vecs @ t[:, 1, :]
            p0 = np.sum(np.abs(w0) ** 2, axis=1)
            p1 = np.sum(np.abs(w1) ** 2, axis=1)
            pick = rng.random(shots) * (p0 + p1) >= p0
            bits[:, k] = pick
            norm = np.sqrt(np.where(pick, p1, p0))
            vecs = np.where(pick[:, None], w1, w0) / norm[:, None]
        keys, counts = np.unique(bits, axis=0, return_counts=True)
        return {"".join(map(str, row)): int(c) for row, c in zip(keys, counts)}
