"""Adiabatic ramps from the tight-binding ground state to the interacting model.

Both modes discretize ``s_j = j / N`` with the left-endpoint rule: step ``j``
evolves for ``dt`` under ``H(s_j)``.  The circuit mode splits each step into
on-site, hopping and spin-orbit products; the exact mode exponentiates the
full sector Hamiltonian.  Energies are always taken against the final
Hamiltonian.
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse.linalg as spla

from .fermion import (
    DEFAULT_QUBIT_CAP,
    Couplings,
    SparseHamiltonian,
    build_hamiltonian,
    expectation,
    ground_state_ed,
    hopping_coefficient,
)
from .gates import pair_gate, u_coulomb
from .lattice import Lattice, build_lattice
from .netcompile import TrotterPlan, compile_step
from .prep import givens_compile, occupied_orbitals, prepare, quadratic_matrix

PRESETS = ("coulomb-only", "full")


@dataclass(frozen=True)
class Schedule:
    T: float
    N: int
    U_final: float
    lam_final: float = 0.0
    t: float = 1.0
    preset: str = "coulomb-only"

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown path preset {self.preset!r}; expected one of {PRESETS}")
        if self.N < 0:
            raise ValueError("step count must be non-negative")
        if self.N > 0 and not self.T > 0:
            raise ValueError("total time must be positive")

    @classmethod
    def from_dt(cls, T: float, dt: float, **kw) -> "Schedule":
        return cls(T=T, N=max(1, int(round(T / dt))), **kw)

    @property
    def dt(self) -> float:
        return self.T / self.N if self.N else 0.0

    def s(self, j: int) -> float:
        return j / self.N if self.N else 0.0

    def couplings_at(self, s: float) -> Couplings:
        lam = self.lam_final if self.preset == "coulomb-only" else self.lam_final * s
        return Couplings(t=self.t, U=self.U_final * s, lam=lam)

    @property
    def initial(self) -> Couplings:
        return self.couplings_at(0.0)

    @property
    def final(self) -> Couplings:
        return self.couplings_at(1.0)


@dataclass(frozen=True)
class TraceRecord:
    step: int
    s: float
    energy_total: float
    energy_per_site: float
    delta_e_percent: float | None
    fidelity: float | None


@dataclass
class Trace:
    records: list[TraceRecord] = field(default_factory=list)
    final_state: object = field(default=None, repr=False)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "s", "energy_total", "energy_per_site", "delta_e_percent", "fidelity"])
        for r in self.records:
            writer.writerow([
                r.step, f"{r.s:.17g}", f"{r.energy_total:.17g}", f"{r.energy_per_site:.17g}",
                "" if r.delta_e_percent is None else f"{r.delta_e_percent:.17g}",
                "" if r.fidelity is None else f"{r.fidelity:.17g}",
            ])
        return buf.getvalue()


@dataclass
class Problem:
    """Everything a ramp needs that does not depend on the integrator."""

    lattice: Lattice
    schedule: Schedule
    n_particles: int
    h_final: SparseHamiltonian | None
    initial_energy: float
    target_energy: float | None = None
    target_state: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites


def delta_e(target: float, initial: float, measured: float) -> float:
    """Distance to the target energy as a percentage of the initial gap."""
    gap = abs(target - initial)
    if gap == 0:
        raise ZeroDivisionError("initial energy equals the target; the error metric is undefined")
    return 100.0 * abs(target - measured) / gap


def initial_state(lattice: Lattice, schedule: Schedule, backend: str = "sv", chi_max: int = 64,
                  precision: str = "double"):
    c = schedule.initial
    basis = occupied_orbitals(quadratic_matrix(lattice, c.t, c.lam))
    return basis, prepare(givens_compile(basis), backend, chi_max, precision)


def build_problem(lattice: Lattice, schedule: Schedule, reference: bool = True,
                  qubit_cap: int = DEFAULT_QUBIT_CAP) -> Problem:
    """Sector, final Hamiltonian, initial energy and (optionally) the ED target.

    Above ``qubit_cap`` no dense object is built; energies then come from the
    measurement groups and the trace carries no error metric.
    """
    if lattice.n_qubits > qubit_cap:
        basis = occupied_orbitals(quadratic_matrix(lattice, schedule.t, schedule.initial.lam))
        return Problem(lattice, schedule, len(basis.occupied), None, float("nan"))
    basis, state = initial_state(lattice, schedule)
    n_particles = len(basis.occupied)
    h_final = build_hamiltonian(lattice, schedule.final, n_particles=n_particles, qubit_cap=qubit_cap)
    problem = Problem(lattice, schedule, n_particles, h_final, expectation(h_final, state.to_dense()))
    if reference:
        problem.target_energy, problem.target_state = ground_state_ed(h_final)
    return problem


def _record(problem: Problem, step: int, s: float, energy: float, vec: np.ndarray | None) -> TraceRecord:
    de = fid = None
    if problem.target_energy is not None and abs(problem.target_energy - problem.initial_energy) > 0:
        de = delta_e(problem.target_energy, problem.initial_energy, energy)
    if problem.target_state is not None and vec is not None:
        fid = float(abs(np.vdot(problem.target_state, vec)) ** 2)
    return TraceRecord(step, s, energy, energy / problem.n_sites, de, fid)


# ------------------------------------------------------------------ exact mode


class _PartMatrices:
    def __init__(self, lattice: Lattice, t: float, n_particles: int):
        self.hop = build_hamiltonian(lattice, Couplings(t, 0, 0), ("hop",), n_particles)
        self.so = build_hamiltonian(lattice, Couplings(t, 0, 1.0), ("so",), n_particles)
        self.coulomb = build_hamiltonian(lattice, Couplings(t, 1.0, 0), ("coulomb",), n_particles)

    def at(self, c: Couplings):
        return self.hop.matrix + c.lam * self.so.matrix + c.U * self.coulomb.matrix


def evolve_exact(problem: Problem, initial: np.ndarray | None = None) -> Trace:
    """Left-endpoint piecewise-constant evolution, each piece exponentiated exactly."""
    sched = problem.schedule
    if problem.h_final is None:
        raise ValueError("exact evolution needs a system within the dense cap")
    parts = _PartMatrices(problem.lattice, sched.t, problem.n_particles)
    if initial is None:
        initial = initial_state(problem.lattice, sched)[1].to_dense()
    vec = problem.h_final.restrict(np.asarray(initial, dtype=complex))
    trace = Trace([_record(problem, 0, 0.0, expectation(problem.h_final, vec), vec)])
    for j in range(sched.N):
        h = parts.at(sched.couplings_at(sched.s(j)))
        vec = spla.expm_multiply(-1j * sched.dt * h, vec)
        s = sched.s(j + 1)
        trace.records.append(_record(problem, j + 1, s, expectation(problem.h_final, vec), vec))
    trace.final_state = vec
    return trace


# ---------------------------------------------------------------- circuit mode


@dataclass(frozen=True)
class StepPlans:
    coulomb: TrotterPlan
    hop: TrotterPlan
    so: TrotterPlan | None

    @classmethod
    def compile(cls, lattice: Lattice, with_so: bool) -> "StepPlans":
        return cls(compile_step(lattice, "coulomb"), compile_step(lattice, "hop"),
                   compile_step(lattice, "so") if with_so else None)


def apply_plan(state, plan: TrotterPlan, lattice: Lattice, c: Couplings, theta: float) -> None:
    """One Trotter factor: fswap layers and placed two-qubit exponentials."""
    cache: dict[tuple[int, int], np.ndarray | None] = {}
    for layer in plan.layers:
        if layer.swaps:
            state.apply_fswap_layer(layer.swaps)
        for inter in layer.interactions:
            if inter.labels not in cache:
                if inter.kind == "coulomb":
                    gate = u_coulomb(theta, c.U).matrix if c.U != 0 else None
                else:
                    coeff = complex(hopping_coefficient(lattice, inter.labels[0], inter.labels[1], c))
                    gate = pair_gate(coeff, theta).matrix if coeff != 0 else None
                cache[inter.labels] = gate
            gate = cache[inter.labels]
            if gate is not None:
                state.apply_two_qubit(gate, inter.positions[0], inter.positions[1])


def trotter_step(state, plans: StepPlans, lattice: Lattice, c: Couplings, dt: float) -> None:
    apply_plan(state, plans.coulomb, lattice, c, dt)
    apply_plan(state, plans.hop, lattice, c, dt)
    if plans.so is not None and c.lam != 0:
        apply_plan(state, plans.so, lattice, c, dt)


def _circuit_energy(problem: Problem, state, groups) -> tuple[float, np.ndarray | None]:
    if problem.h_final is not None:
        vec = problem.h_final.restrict(state.to_dense())
        return expectation(problem.h_final, vec), vec
    from .measure import total_energy

    report = total_energy(state, groups, problem.lattice, problem.schedule.final)
    return report.total, None


def evolve_circuit(problem: Problem, backend: str = "sv", chi_max: int = 64, precision: str = "double",
                   state=None, plans: StepPlans | None = None, record_every: int = 1) -> Trace:
    sched = problem.schedule
    lattice = problem.lattice
    if state is None:
        state = initial_state(lattice, sched, backend, chi_max, precision)[1]
    if state.n_qubits != lattice.n_qubits:
        raise ValueError(f"state has {state.n_qubits} qubits, lattice needs {lattice.n_qubits}")
    if plans is None:
        plans = StepPlans.compile(lattice, sched.lam_final != 0)
    groups = None
    if problem.h_final is None:
        from .measure import build_groups

        groups = build_groups(lattice)
    energy, vec = _circuit_energy(problem, state, groups)
    trace = Trace([_record(problem, 0, 0.0, energy, vec)])
    for j in range(sched.N):
        trotter_step(state, plans, lattice, sched.couplings_at(sched.s(j)), sched.dt)
        if (j + 1) % record_every == 0 or j + 1 == sched.N:
            energy, vec = _circuit_energy(problem, state, groups)
            trace.records.append(_record(problem, j + 1, sched.s(j + 1), energy, vec))
    trace.final_state = state
    return trace


# ----------------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepPoint:
    T: float
    dt: float
    N: int
    delta_e_percent: float | None
    wall_time_s: float
    error: str = ""

    @property
    def discarded(self) -> bool:
        return self.delta_e_percent is not None and self.delta_e_percent > 100.0


def _sweep_one(args) -> SweepPoint:
    nx, ny, base, T, dt, backend, chi_max, target, initial = args
    start = time.perf_counter()
    sched = replace(base, T=T, N=max(1, int(round(T / dt))))
    try:
        lattice = build_lattice((nx, ny))
        problem = build_problem(lattice, sched, reference=False)
        problem.target_energy = target
        problem.initial_energy = initial
        trace = evolve_circuit(problem, backend=backend, chi_max=chi_max, record_every=sched.N)
        de = trace.final.delta_e_percent
        return SweepPoint(T, dt, sched.N, de, time.perf_counter() - start)
    except Exception as exc:  # one bad grid point must not sink the sweep
        return SweepPoint(T, dt, sched.N, None, time.perf_counter() - start, f"{type(exc).__name__}: {exc}")


def sweep(lattice: Lattice, base: Schedule, Ts, dts, backend: str = "sv", chi_max: int = 64,
          workers: int | None = None) -> list[SweepPoint]:
    grid = sorted((float(T), float(dt)) for T in Ts for dt in dts)
    if not grid:
        raise ValueError("empty sweep grid")
    ref = build_problem(lattice, replace(base, N=1, T=1.0))
    jobs = [(lattice.spec.nx, lattice.spec.ny, base, T, dt, backend, chi_max, ref.target_energy, ref.initial_energy)
            for T, dt in grid]
    workers = workers if workers is not None else min(len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        return [_sweep_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_one, jobs))


def sweep_csv(points: list[SweepPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["T", "dt", "N", "delta_e_percent", "wall_time_s", "discarded", "error"])
    for p in points:
        writer.writerow([f"{p.T:.17g}", f"{p.dt:.17g}", p.N,
                         "" if p.delta_e_percent is None else f"{p.delta_e_percent:.17g}",
                         f"{p.wall_time_s:.6f}", int(p.discarded), p.error])
    return buf.getvalue()
