import numpy as np
import pytest
from scipy.linalg import expm

from agsim.fermion import PauliSum, jw_ladder
from agsim.gates import (
    Gate,
    diagonalizer,
    format_gate_list,
    fswap,
    hop_generator,
    is_unitary,
    pair_gate,
    parse_gate_list,
    so_generator,
    so_prerotation,
    u_coulomb,
    u_hop,
    u_so,
)

from conftest import random_state


def block_preserving(m):
    mask = np.ones((4, 4), dtype=bool)
    mask[0, 0] = mask[3, 3] = False
    mask[1:3, 1:3] = False
    return np.allclose(m[mask], 0)


def pair_operator(upper_create: bool) -> np.ndarray:
    """Dense a^dag_u a_l (or its adjoint) on two adjacent modes."""
    cre = jw_ladder(0 if upper_create else 1, "create", 2)
    ann = jw_ladder(1 if upper_create else 0, "annihilate", 2)
    return (cre * ann).to_sparse().toarray()


def test_coulomb():
    assert np.allclose(u_coulomb(0.0, 0.5).matrix, np.eye(4))
    assert np.allclose(u_coulomb(np.pi, 0.5).matrix, np.diag([1, 1, 1, np.exp(-0.5j * np.pi)]))
    assert np.allclose(u_coulomb(0.3, 0.5).matrix @ u_coulomb(0.4, 0.5).matrix, u_coulomb(0.7, 0.5).matrix)


def test_hop_matches_exponential():
    for theta, t in [(0.0, 1.0), (0.37, -1.0), (np.pi / 2, 1.0)]:
        assert np.allclose(u_hop(theta, t).matrix, expm(-1j * t * theta * hop_generator()))
    m = u_hop(np.pi / 2, 1.0).matrix
    assert np.allclose(m[1:3, 1:3], [[0, -1j], [-1j, 0]])


def test_hop_generator_is_jordan_wigner_pair():
    assert np.allclose(hop_generator(), pair_operator(True) + pair_operator(False))


def test_so_matches_exponential():
    for theta, lam, phi in [(0.0, 1.0, 0.2), (0.4, 0.7, np.pi / 3), (1.1, -0.3, -2.0)]:
        g = u_so(theta, lam, phi).matrix
        assert np.allclose(g, expm(-1j * (2 / 3) * lam * theta * so_generator(phi)))
        assert is_unitary(g)


def test_all_gates_unitary_and_excitation_preserving():
    gates = [u_coulomb(0.3, 2.0), u_hop(0.2, 1.0), u_so(0.3, 1.0, 0.5), fswap(), pair_gate(0.3 - 0.4j, 0.7)]
    for g in gates:
        assert is_unitary(g)
        assert block_preserving(g.matrix)
    assert is_unitary(diagonalizer())


def test_first_derivative_matches_generator():
    eps = 1e-6
    d_hop = (u_hop(eps, 1.3).matrix - u_hop(-eps, 1.3).matrix) / (2 * eps)
    assert np.allclose(d_hop, -1j * 1.3 * hop_generator(), atol=1e-6)
    d_so = (u_so(eps, 0.9, 0.4).matrix - u_so(-eps, 0.9, 0.4).matrix) / (2 * eps)
    assert np.allclose(d_so, -1j * 0.6 * so_generator(0.4), atol=1e-6)


def test_fswap_properties():
    f = fswap().matrix
    assert np.allclose(f @ f, np.eye(4))
    assert f[3, 3] == -1
    # conjugation relabels the adjacent modes: F a^dag_0 a_1 F = a^dag_1 a_0
    assert np.allclose(f @ pair_operator(True) @ f, pair_operator(False))


def test_pair_gate_exponentiates_jordan_wigner_term():
    for c in (-1.0, 0.5j, np.exp(0.7j) * 2 / 3):
        term = c * pair_operator(True) + np.conj(c) * pair_operator(False)
        assert np.allclose(pair_gate(c, 0.31).matrix, expm(-0.31j * term))


def test_diagonalizer_maps_hopping_to_p10_minus_p01(rng):
    d = diagonalizer().matrix
    conj = d @ hop_generator() @ d.conj().T
    assert np.allclose(conj, np.diag([0, -1, 1, 0]))
    for _ in range(10):
        v = random_state(rng, 2)
        p = np.abs(d @ v) ** 2
        assert p[2] - p[1] == pytest.approx(np.vdot(v, hop_generator() @ v).real)


def test_prerotation_makes_complex_pair_diagonal():
    for alpha in (0.0, 0.4, -2.2, np.pi):
        c = 0.8 * np.exp(1j * alpha)
        term = c * pair_operator(True) + np.conj(c) * pair_operator(False)
        r = np.kron(so_prerotation(alpha).matrix, np.eye(2))
        d = diagonalizer().matrix
        conj = d @ r @ term @ r.conj().T @ d.conj().T
        assert np.allclose(conj, np.diag([0, -0.8, 0.8, 0]))
    assert np.allclose(so_prerotation(0).matrix, np.eye(2))


def test_gate_list_round_trip():
    gates = [u_so(0.3, 1.0, 0.5).on(2, 3), fswap().on(0, 1), so_prerotation(0.2).on(4)]
    back = parse_gate_list(format_gate_list(gates))
    for a, b in zip(gates, back):
        assert a.label == b.label and a.targets == b.targets
        assert np.array_equal(a.matrix, b.matrix)


def test_gate_dagger():
    g = u_so(0.3, 1.0, 0.5)
    assert np.allclose(g.dagger().matrix @ g.matrix, np.eye(4))
    assert isinstance(g.on(1, 2), Gate) and g.on(1, 2).targets == (1, 2)
