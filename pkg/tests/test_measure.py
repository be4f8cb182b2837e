import numpy as np
import pytest

from agsim.fermion import Couplings, build_hamiltonian, expectation
from agsim.lattice import build_lattice
from agsim.measure import (
    N_GROUPS,
    EnergyReport,
    build_groups,
    coulomb_energy,
    hopping_group_energy,
    total_energy,
)
from agsim.netcompile import expected_terms
from agsim.sim import MpsState, StateVector

from conftest import random_state

COUPLINGS = Couplings(t=1.0, U=0.5, lam=0.8)


@pytest.mark.parametrize("nx,ny", [(a, b) for a in range(1, 5) for b in range(1, 5)])
def test_seventeen_groups_cover_everything(nx, ny):
    lat = build_lattice((nx, ny))
    groups = build_groups(lat)
    assert len(groups) == N_GROUPS
    for kind in ("hop", "so"):
        seen = [tuple(sorted(t.labels)) for g in groups if g.kind == kind for t in g.terms]
        assert sorted(seen) == sorted(expected_terms(lat, kind))


def test_groups_measure_disjoint_adjacent_pairs(strip):
    for g in build_groups(strip):
        positions = [p for t in g.terms for p in t.positions]
        assert len(positions) == len(set(positions))
        assert all(t.positions[1] == t.positions[0] + 1 for t in g.terms)


def test_routing_places_labels():
    lat = build_lattice((2, 1))
    for g in build_groups(lat):
        perm = list(range(lat.n_qubits))
        for layer in g.routing:
            for p, q in layer:
                perm[p], perm[q] = perm[q], perm[p]
        for t in g.terms:
            assert (perm[t.positions[0]], perm[t.positions[1]]) == t.labels


def test_energy_matches_direct_expectation(hexagon, rng):
    groups = build_groups(hexagon)
    h = build_hamiltonian(hexagon, COUPLINGS)
    for _ in range(5):
        v = random_state(rng, 12)
        report = total_energy(StateVector(v), groups, hexagon, COUPLINGS)
        assert report.total == pytest.approx(expectation(h, v), abs=1e-10)
        mps = total_energy(MpsState.from_dense(v), groups, hexagon, COUPLINGS)
        assert mps.total == pytest.approx(report.total, abs=1e-10)


def test_parts_match_part_hamiltonians(hexagon, rng):
    v = random_state(rng, 12)
    report = total_energy(StateVector(v), build_groups(hexagon), hexagon, COUPLINGS)
    for part, value in (("hop", report.e_hop), ("so", report.e_so), ("coulomb", report.e_coulomb)):
        h = build_hamiltonian(hexagon, COUPLINGS, (part,))
        assert value == pytest.approx(expectation(h, v), abs=1e-10)


def test_group_functions_check_kind(hexagon, rng):
    groups = build_groups(hexagon)
    sv = StateVector(random_state(rng, 12))
    with pytest.raises(ValueError):
        coulomb_energy(sv, groups[1], COUPLINGS)
    with pytest.raises(ValueError):
        hopping_group_energy(sv, groups[0], hexagon, COUPLINGS)
    assert hopping_group_energy(sv, groups[2], hexagon, Couplings(1.0, 0.5, 0.0)) == (0.0, 1.0)


def test_state_untouched_by_measurement(hexagon, rng):
    v = random_state(rng, 12)
    sv = StateVector(v.copy())
    total_energy(sv, build_groups(hexagon), hexagon, COUPLINGS)
    assert np.array_equal(sv.amplitudes, v)


def test_sampled_energy_converges(hexagon, rng):
    v = random_state(rng, 12)
    groups = build_groups(hexagon)
    exact = total_energy(StateVector(v), groups, hexagon, COUPLINGS).total
    a = total_energy(StateVector(v), groups, hexagon, COUPLINGS, shots=20000, seed=5)
    b = total_energy(StateVector(v), groups, hexagon, COUPLINGS, shots=20000, seed=5)
    assert a.total == b.total
    assert a.total == pytest.approx(exact, abs=0.15)


def test_report_csv():
    report = EnergyReport({"coulomb": 0.25, "H0-u-hop": -1.0, "H0-u-so": 0.125}, n_sites=2)
    assert report.total == pytest.approx(-0.625)
    lines = report.to_csv().splitlines()
    assert lines[0] == "group,value"
    assert "per_site,-0.3125" in lines
    assert "energy report" in report.summary()


def test_shot_noise_scales_as_inverse_sqrt(hexagon, rng):
    v = random_state(rng, 12)
    sv = StateVector(v)
    groups = build_groups(hexagon)
    exact = total_energy(sv, groups, hexagon, COUPLINGS).total
    rms = []
    for shots in (1000, 100_000):
        errs = [total_energy(sv, groups, hexagon, COUPLINGS, shots=shots, seed=s).total - exact for s in range(12)]
        rms.append(np.sqrt(np.mean(np.square(errs))))
    assert 4 < rms[0] / rms[1] < 25  # ideal ratio 10


def test_backends_agree_on_every_group_distribution(hexagon, rng):
    from agsim.measure import _pair_distributions

    v = random_state(rng, 12)
    for g in build_groups(hexagon):
        a, b = StateVector(v.copy()), MpsState.from_dense(v.copy())
        a.apply_fswap_layers(g.routing)
        b.apply_fswap_layers(g.routing)
        pairs = [t.positions for t in g.terms]
        for x, y in zip(_pair_distributions(a, pairs), _pair_distributions(b, pairs)):
            assert np.abs(x - y).max() < 1e-8


def test_prepared_state_has_sharp_particle_number(hexagon):
    from agsim.fermion import popcount
    from agsim.prep import tight_binding_state

    _, _, state = tight_binding_state(hexagon, lam=0.4)
    probs = np.abs(state.amplitudes) ** 2
    assert probs[popcount(np.arange(probs.size)) == 6].sum() == pytest.approx(1.0, abs=1e-12)
