import numpy as np
import pytest

from agsim.evolve import (
    Schedule,
    StepPlans,
    SweepPoint,
    build_problem,
    delta_e,
    evolve_circuit,
    evolve_exact,
    sweep,
    sweep_csv,
    trotter_step,
)
from agsim.fermion import Couplings, build_hamiltonian, hopping_coefficient, jw_ladder
from agsim.sim import init_computational, StateVector
from scipy.sparse.linalg import expm_multiply

from conftest import random_state


def test_schedule():
    s = Schedule.from_dt(1.0, 0.025, U_final=0.5)
    assert s.N == 40 and s.dt == pytest.approx(0.025)
    assert s.couplings_at(0.5) == Couplings(1.0, 0.25, 0.0)
    full = Schedule(T=1, N=4, U_final=0.5, lam_final=1.0, preset="full")
    assert full.initial.lam == 0 and full.final.lam == 1.0
    fixed = Schedule(T=1, N=4, U_final=0.5, lam_final=1.0)
    assert fixed.initial.lam == 1.0
    with pytest.raises(ValueError):
        Schedule(T=1, N=4, U_final=0.5, preset="quench")
    with pytest.raises(ValueError):
        Schedule(T=0, N=4, U_final=0.5)


def test_delta_e():
    assert delta_e(-2.0, -1.0, -1.5) == pytest.approx(50.0)
    assert delta_e(-2.0, -1.0, -2.0) == 0.0
    with pytest.raises(ZeroDivisionError):
        delta_e(1.0, 1.0, 0.5)


def test_zero_steps_returns_initial(hexagon):
    problem = build_problem(hexagon, Schedule(T=1.0, N=0, U_final=0.5))
    trace = evolve_circuit(problem)
    assert len(trace.records) == 1
    assert trace.final.delta_e_percent == pytest.approx(100.0)
    assert evolve_exact(problem).final.energy_total == pytest.approx(trace.final.energy_total)


def term_operator(lattice, u, l, c):
    coeff = hopping_coefficient(lattice, u, l, c)
    n = lattice.n_qubits
    op = (coeff * (jw_ladder(u, "create", n) * jw_ladder(l, "annihilate", n))).to_sparse()
    return (op + op.conj().T).tocsr()


def test_trotter_step_matches_ordered_term_products(hexagon, rng):
    c = Couplings(1.0, 0.7, 0.9)
    dt = 0.11
    v = random_state(rng, 12)
    plans = StepPlans.compile(hexagon, True)
    sv = StateVector(v.copy())
    trotter_step(sv, plans, hexagon, c, dt)
    ref = expm_multiply(-1j * dt * build_hamiltonian(hexagon, c, ("coulomb",)).matrix, v)
    for plan in (plans.hop, plans.so):
        for inter in plan.interactions:
            ref = expm_multiply(-1j * dt * term_operator(hexagon, *inter.labels, c), ref)
    assert np.abs(sv.amplitudes - ref).max() < 1e-10
    # the split step differs from the full exponential only at second order
    full = expm_multiply(-1j * dt * build_hamiltonian(hexagon, c).matrix, v)
    assert 1e-6 < np.linalg.norm(sv.amplitudes - full) < 10 * dt**2


def test_exact_reaches_ground_state_slowly(hexagon):
    problem = build_problem(hexagon, Schedule(T=10.0, N=200, U_final=0.5))
    trace = evolve_exact(problem)
    assert trace.final.delta_e_percent < 1.0
    assert trace.final.fidelity > 0.99
    assert [r.step for r in trace.records] == list(range(201))


def test_circuit_and_exact_agree_for_small_steps(hexagon):
    problem = build_problem(hexagon, Schedule(T=1.0, N=40, U_final=0.5))
    circuit = evolve_circuit(problem).final.energy_per_site
    exact = evolve_exact(problem).final.energy_per_site
    assert circuit == pytest.approx(exact, abs=2e-3)
    assert problem.initial_energy / 6 == pytest.approx(-4 / 3 + 0.5 / 4, abs=1e-12)


def test_record_every(hexagon):
    problem = build_problem(hexagon, Schedule(T=0.5, N=10, U_final=0.5))
    trace = evolve_circuit(problem, record_every=4)
    assert [r.step for r in trace.records] == [0, 4, 8, 10]


def test_mps_backend_untruncated(hexagon):
    problem = build_problem(hexagon, Schedule(T=0.5, N=10, U_final=0.5, lam_final=0.5))
    sv = evolve_circuit(problem)
    mps = evolve_circuit(problem, backend="mps", chi_max=64)
    assert np.abs(mps.final_state.to_dense() - sv.final_state.to_dense()).max() < 1e-9
    assert mps.final_state.fidelity_ledger == 1.0


def test_state_size_mismatch(hexagon):
    problem = build_problem(hexagon, Schedule(T=1.0, N=2, U_final=0.5))
    with pytest.raises(ValueError):
        evolve_circuit(problem, state=init_computational(4, "0101"))


def test_sweep_grid(hexagon):
    points = sweep(hexagon, Schedule(T=1.0, N=1, U_final=0.5), [1.0, 0.5], [0.1, 0.05], workers=1)
    assert [(p.T, p.dt) for p in points] == [(0.5, 0.05), (0.5, 0.1), (1.0, 0.05), (1.0, 0.1)]
    assert all(p.delta_e_percent is not None and not p.error for p in points)
    csv = sweep_csv(points).splitlines()
    assert csv[0] == "T,dt,N,delta_e_percent,wall_time_s,discarded,error"
    assert len(csv) == 5


def test_sweep_point_discard_flag():
    assert SweepPoint(1, 0.1, 10, 150.0, 0.0).discarded
    assert not SweepPoint(1, 0.1, 10, 50.0, 0.0).discarded
    assert not SweepPoint(1, 0.1, 10, None, 0.0, "boom").discarded


def test_fidelity_grows_with_total_time(hexagon):
    fids = []
    for T in (1.0, 2.0, 4.0):
        problem = build_problem(hexagon, Schedule.from_dt(T, 0.01, U_final=0.5))
        fids.append(evolve_circuit(problem, record_every=problem.schedule.N).final.fidelity)
    assert fids == sorted(fids)


def test_initial_energy_is_orbital_sum(hexagon):
    from agsim.prep import occupied_orbitals, quadratic_matrix

    problem = build_problem(hexagon, Schedule(T=1.0, N=4, U_final=0.0, lam_final=0.6))
    basis = occupied_orbitals(quadratic_matrix(hexagon, 1.0, 0.6))
    assert problem.initial_energy == pytest.approx(basis.ground_energy, abs=1e-8)
