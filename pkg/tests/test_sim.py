import numpy as np
import pytest

from agsim.gates import diagonalizer, fswap, u_hop, u_so
from agsim.sim import (
    MpsState,
    StateVector,
    apply_single_qubit,
    apply_two_qubit,
    fidelity,
    init_computational,
    load_state,
    overlap,
    probabilities,
    sample,
    save_state,
)

from conftest import random_state


def kron_apply(v, g, p, n):
    k = g.shape[0].bit_length() - 1
    full = np.kron(np.kron(np.eye(2**p), g), np.eye(2 ** (n - p - k)))
    return full @ v


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / abs(np.diag(r)))


def test_init():
    sv = init_computational(2, "00")
    assert np.array_equal(sv.amplitudes, [1, 0, 0, 0])
    m = init_computational(4, "0110", backend="mps")
    assert m.bond_dims == [1, 1, 1] and m.fidelity_ledger == 1.0 and m.norm() == pytest.approx(1)
    with pytest.raises(ValueError):
        init_computational(3, "01")
    with pytest.raises(ValueError):
        init_computational(2, "01", backend="gpu")


def test_sv_against_kron_oracle(rng):
    n = 3
    v = random_state(rng, n)
    sv = StateVector(v.copy())
    for _ in range(20):
        p = int(rng.integers(0, n - 1))
        g = random_unitary(rng, 4)
        v = kron_apply(v, g, p, n)
        apply_two_qubit(sv, g, (p, p + 1))
    q = int(rng.integers(0, n))
    h = random_unitary(rng, 2)
    apply_single_qubit(sv, h, q)
    assert np.allclose(sv.amplitudes, kron_apply(v, h, q, n))


def test_non_adjacent_rejected():
    sv = init_computational(3, "000")
    with pytest.raises(ValueError):
        sv.apply_two_qubit(np.eye(4), 0, 2)
    m = init_computational(3, "000", backend="mps")
    with pytest.raises(ValueError):
        m.apply_two_qubit(np.eye(4), 1, 0)


def test_fswap_layer_matches_gates(rng):
    n = 6
    v = random_state(rng, n)
    fast, slow = StateVector(v.copy()), StateVector(v.copy())
    layers = [[(0, 1), (2, 3), (4, 5)], [(1, 2), (3, 4)]]
    for layer in layers * 3:
        fast.apply_fswap_layer(layer)
        for p, q in layer:
            slow.apply_two_qubit(fswap(), p, q)
    assert np.allclose(fast.amplitudes, slow.amplitudes)
    folded = StateVector(v.copy())
    folded.apply_fswap_layers(layers * 3)
    assert np.allclose(folded.amplitudes, slow.amplitudes)
    with pytest.raises(ValueError):
        fast.apply_fswap_layer([(0, 1), (1, 2)])


def test_permutation_cache_is_bounded(rng):
    sv = StateVector(random_state(rng, 8))
    for p in range(7):
        sv.apply_fswap_layer([(p, p + 1)])
    for k in range(2 * StateVector.PERM_CACHE_SIZE):
        sv.apply_fswap_layers([[(k % 7, k % 7 + 1)], [((k + 3) % 7, (k + 3) % 7 + 1)]])
    assert len(sv._perm_cache) <= StateVector.PERM_CACHE_SIZE


def test_mps_full_rank_matches_sv(rng):
    n = 12
    v = random_state(rng, n)
    sv, mps = StateVector(v.copy()), MpsState.from_dense(v.copy(), chi_max=2 ** (n // 2))
    for _ in range(60):
        p = int(rng.integers(0, n - 1))
        g = u_so(rng.uniform(0, 3), 1.0, rng.uniform(-3, 3)).matrix if rng.random() < 0.5 else random_unitary(rng, 4)
        sv.apply_two_qubit(g, p)
        mps.apply_two_qubit(g, p)
    assert np.abs(mps.to_dense() - sv.amplitudes).max() < 1e-9
    assert fidelity(mps, sv) >= 1 - 1e-9
    assert mps.fidelity_ledger == pytest.approx(1.0, abs=1e-12)
    for k, chi in enumerate(mps.bond_dims, start=1):
        assert chi <= min(2**k, 2 ** (n - k), mps.chi_max)


def test_mps_truncation_ledger(rng):
    n = 10
    circuit = [(int(p), random_unitary(rng, 4)) for p in rng.integers(0, n - 1, size=80)]
    ledgers = []
    for chi in (32, 8, 4, 2):
        m = init_computational(n, "0101010101", backend="mps", chi_max=chi)
        history = [1.0]
        for p, g in circuit:
            m.apply_two_qubit(g, p)
            history.append(m.fidelity_ledger)
            assert m.norm() == pytest.approx(1.0, abs=1e-10)
        assert all(a >= b - 1e-15 for a, b in zip(history, history[1:]))
        assert max(m.bond_dims) <= chi
        ledgers.append(m.fidelity_ledger)
    assert ledgers[0] == 1.0
    assert 0 < ledgers[-1] < 1


def test_identity_gate_changes_nothing(rng):
    v = random_state(rng, 4)
    m = MpsState.from_dense(v.copy(), chi_max=4)
    m.apply_two_qubit(np.eye(4), 1)
    assert np.allclose(m.to_dense(), v) and m.fidelity_ledger == 1.0
    m.apply_single_qubit(np.eye(2), 3)
    assert np.allclose(m.to_dense(), v)


def test_probabilities(rng):
    assert np.allclose(probabilities(init_computational(2, "01"), [0, 1]), [0, 1, 0, 0])
    plus = StateVector(np.array([1, 1]) / np.sqrt(2))
    assert np.allclose(probabilities(plus, [0]), [0.5, 0.5])
    n = 7
    v = random_state(rng, n)
    sv, mps = StateVector(v), MpsState.from_dense(v)
    tensor = (np.abs(v) ** 2).reshape((2,) * n)
    for subset in ([3, 1], [0, 6], [2, 3], [5], [6, 0, 3]):
        others = tuple(q for q in range(n) if q not in subset)
        ref = np.transpose(tensor.sum(axis=others), np.argsort(np.argsort(subset))).reshape(-1)
        assert np.allclose(sv.probabilities(subset), ref)
        assert np.allclose(mps.probabilities(subset), ref)
        assert sv.probabilities(subset).sum() == pytest.approx(1, abs=1e-12)
    with pytest.raises(ValueError):
        sv.probabilities(list(range(7)), max_subset=6)


def test_overlap_and_fidelity(rng):
    v = random_state(rng, 5)
    assert overlap(StateVector(v), StateVector(v)) == pytest.approx(1)
    assert overlap(init_computational(3, "010"), init_computational(3, "011")) == 0
    a, b = MpsState.from_dense(v), MpsState.from_dense(v)
    assert fidelity(a, b) == pytest.approx(1)
    with pytest.raises(ValueError):
        overlap(init_computational(2, "00"), init_computational(3, "000"))


def test_sampling(rng):
    counts = sample(init_computational(3, "101"), 50, seed=1)
    assert counts == {"101": 50}
    v = random_state(rng, 3)
    sv, mps = StateVector(v), MpsState.from_dense(v)
    assert sample(sv, 1000, seed=7) == sample(sv, 1000, seed=7)
    shots = 100_000
    probs = np.abs(v) ** 2
    for state in (sv, mps):
        counts = sample(state, shots, seed=3)
        observed = np.array([counts.get(format(i, "03b"), 0) for i in range(8)])
        chi2 = np.sum((observed - shots * probs) ** 2 / (shots * probs))
        assert chi2 < 30  # 7 dof, p ~ 1e-4
    with pytest.raises(ValueError):
        sample(sv, 0)


def test_norm_drift_over_many_gates(rng):
    sv = StateVector(random_state(rng, 6))
    gates = [u_hop(0.1, 1.0).matrix, u_so(0.2, 1.0, 0.3).matrix, diagonalizer().matrix, fswap().matrix]
    for k in range(10_000):
        sv.apply_two_qubit(gates[k % 4], k % 5)
    assert abs(sv.norm() - 1) < 1e-9


def test_particle_number_conserved_by_plans(hexagon):
    from agsim.evolve import StepPlans, trotter_step
    from agsim.fermion import Couplings, popcount

    plans = StepPlans.compile(hexagon, with_so=True)
    sv = init_computational(12, "110100101001")
    trotter_step(sv, plans, hexagon, Couplings(1.0, 0.5, 1.0), 0.3)
    weights = popcount(np.arange(2**12))
    assert np.sum(np.abs(sv.amplitudes[weights != 6]) ** 2) < 1e-24


@pytest.mark.parametrize("precision", ["double", "single"])
def test_checkpoint_round_trip(tmp_path, rng, precision):
    v = random_state(rng, 6)
    dtype = np.complex64 if precision == "single" else np.complex128
    sv = StateVector(v.astype(dtype))
    save_state(sv, tmp_path / "sv.bin")
    back = load_state(tmp_path / "sv.bin")
    assert back.dtype == dtype and np.array_equal(back.amplitudes, sv.amplitudes)
    assert (tmp_path / "sv.bin").read_bytes()[:8] == b"AGSIMSV1"

    m = MpsState.from_dense(v, chi_max=4)
    m.apply_two_qubit(random_unitary(rng, 4), 2)
    save_state(m, tmp_path / "mps.bin")
    back = load_state(tmp_path / "mps.bin")
    assert back.chi_max == 4 and back.center == m.center and back.fidelity_ledger == m.fidelity_ledger
    assert all(np.array_equal(a, b) for a, b in zip(back.tensors, m.tensors))


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "bad.bin").write_bytes(b"NOTASTATE" + bytes(16))
    with pytest.raises(ValueError):
        load_state(tmp_path / "bad.bin")
