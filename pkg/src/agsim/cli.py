"""Batch driver: ``agsim run | sweep | bench | compile-plan | prep-check``.

Configuration is a flat ``key = value`` file; command-line flags override it.
Exit codes: 0 success, 1 configuration error, 2 capacity error, 3 failed
numerical check.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .evolve import (
    PRESETS,
    Schedule,
    Trace,
    TraceRecord,
    build_problem,
    delta_e,
    evolve_circuit,
    evolve_exact,
    sweep,
    sweep_csv,
)
from .fermion import DEFAULT_QUBIT_CAP, CapacityError, Couplings, build_hamiltonian, expectation, ground_state_ed
from .lattice import LatticeSpec, build_lattice
from .measure import build_groups, total_energy
from .netcompile import CompileError, KINDS, compile_step, export_schedule, verify_plan
from .prep import givens_compile, occupied_orbitals, prepare, quadratic_matrix
from .sim import StateVector, fidelity

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_NUMERIC = 0, 1, 2, 3
BACKENDS = ("sv", "mps", "exact-adiabatic", "ed")


class ConfigError(ValueError):
    pass


class NumericalCheckError(RuntimeError):
    pass


def _physical_memory_gb() -> float:
    try:
        return os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES") / 2**30
    except (ValueError, OSError, AttributeError):
        return 8.0


@dataclass(frozen=True)
class RunConfig:
    nx: int = 1
    ny: int = 1
    t: float = 1.0
    U: float = 0.5
    lam: float = 0.0
    preset: str = "coulomb-only"
    T: float = 1.0
    N: int = 40
    backend: str = "sv"
    chi: int = 64
    precision: str = "double"
    seed: int = 0
    shots: int = 0  # 0 = exact probabilities
    out: str = "out"
    memory_gb: float = 0.0  # 0 = half the physical memory
    T_grid: str = "0.5:4:8"
    dt_grid: str = "0.005,0.0125,0.025,0.05,0.1"
    workers: int = 0  # 0 = one per core

    def validate(self) -> "RunConfig":
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("nx and ny must be >= 1")
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if not self.T > 0:
            raise ConfigError("T must be > 0")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}")
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {PRESETS}")
        if self.precision not in ("double", "single"):
            raise ConfigError("precision must be 'double' or 'single'")
        if self.chi < 1:
            raise ConfigError("chi must be >= 1")
        if self.shots < 0:
            raise ConfigError("shots must be >= 0")
        return self

    @property
    def memory_budget(self) -> float:
        gb = self.memory_gb if self.memory_gb > 0 else _physical_memory_gb() / 2
        return gb * 2**30

    @property
    def schedule(self) -> Schedule:
        return Schedule(T=self.T, N=self.N, U_final=self.U, lam_final=self.lam, t=self.t, preset=self.preset)

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(f"unknown configuration key {key!r}")
            kwargs[key] = _coerce(key, types[key], raw)
        return cls(**kwargs).validate()


def _coerce(key: str, kind: str, raw):
    try:
        if kind == "int":
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        return float(raw) if kind == "float" else str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind}") from None


def read_config_file(path: str | Path) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        try:
            values.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    return RunConfig.from_mapping(values)


# -------------------------------------------------------------------- capacity


def estimate_bytes(n_qubits: int, backend: str, chi: int, precision: str = "double") -> int:
    item = 8 if precision == "single" else 16
    if backend == "sv":
        # state, gate temporary, cached signed permutations, dense energy copy
        return 2**n_qubits * (3 * item + 16)
    if backend == "mps":
        tensors = n_qubits * 2 * chi * chi * item
        dense = 2**n_qubits * 40 if n_qubits <= DEFAULT_QUBIT_CAP else 0
        return 4 * tensors + dense
    # sector construction enumerates the full basis
    return 2**n_qubits * 48


def check_capacity(cfg: RunConfig, n_qubits: int) -> None:
    if cfg.backend in ("ed", "exact-adiabatic") and n_qubits > DEFAULT_QUBIT_CAP:
        raise CapacityError(f"{cfg.backend} handles at most {DEFAULT_QUBIT_CAP} qubits, lattice needs {n_qubits}")
    need = estimate_bytes(n_qubits, cfg.backend, cfg.chi, cfg.precision)
    if need > cfg.memory_budget:
        raise CapacityError(
            f"{cfg.backend} on {n_qubits} qubits needs about {need / 2**30:.1f} GiB, "
            f"budget is {cfg.memory_budget / 2**30:.1f} GiB (set memory_gb)"
        )


# ------------------------------------------------------------------------- run


def _versions() -> dict[str, str]:
    return {"agsim": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def execute_run(cfg: RunConfig) -> dict:
    """Prepare, evolve and measure; returns artifacts as strings plus a result dict."""
    lattice = build_lattice(LatticeSpec(cfg.nx, cfg.ny))
    check_capacity(cfg, lattice.n_qubits)
    sched = cfg.schedule
    dense_ok = lattice.n_qubits <= DEFAULT_QUBIT_CAP
    problem = build_problem(lattice, sched, reference=dense_ok)
    results: dict = {"n_qubits": lattice.n_qubits, "n_sites": lattice.n_sites, "n_particles": problem.n_particles}

    if cfg.backend == "ed":
        final = StateVector(problem.h_final.embed(problem.target_state))
        trace = None
    elif cfg.backend == "exact-adiabatic":
        trace = evolve_exact(problem)
        final = StateVector(problem.h_final.embed(trace.final_state))
    else:
        trace = evolve_circuit(problem, backend=cfg.backend, chi_max=cfg.chi, precision=cfg.precision)
        final = trace.final_state
        if cfg.backend == "mps":
            results["mps_fidelity_ledger"] = final.fidelity_ledger
            results["mps_truncations"] = final.truncations
            if dense_ok:
                ref = evolve_circuit(problem, backend="sv", record_every=sched.N).final_state
                results["mps_fidelity_overlap"] = fidelity(final, ref)

    groups = build_groups(lattice)
    shots = cfg.shots or None
    report = total_energy(final, groups, lattice, sched.final, shots=shots, seed=cfg.seed)
    if shots is None and problem.h_final is not None:
        direct = expectation(problem.h_final, final.to_dense())
        if abs(direct - report.total) > 1e-8 * max(1.0, abs(direct)):
            raise NumericalCheckError(f"group energy {report.total!r} disagrees with direct {direct!r}")
    norm = final.norm()
    if abs(norm - 1) > 1e-6:
        raise NumericalCheckError(f"final state norm drifted to {norm!r}")

    if trace is None:
        e = report.total
        trace = Trace([TraceRecord(0, 1.0, e, e / lattice.n_sites, 0.0, 1.0)])
    results.update({
        "initial_energy_per_site": problem.initial_energy / lattice.n_sites,
        "target_energy_per_site": None if problem.target_energy is None else problem.target_energy / lattice.n_sites,
        "final_energy_per_site": report.per_site,
        "final_fidelity": trace.final.fidelity,
    })
    if problem.target_energy is not None and problem.target_energy != problem.initial_energy:
        results["delta_e_percent"] = delta_e(problem.target_energy, problem.initial_energy, report.total)
    return {"trace": trace.to_csv(), "report": report.to_csv(), "summary": report.summary(), "results": results}


def cmd_run(cfg: RunConfig) -> int:
    start = time.perf_counter()
    out = execute_run(cfg)
    wall = time.perf_counter() - start
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "trace.csv").write_text(out["trace"])
    (outdir / "energy_report.csv").write_text(out["report"])
    meta = {"config": asdict(cfg), "versions": _versions(), "wall_time_s": wall, "results": out["results"]}
    (outdir / "run_metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(out["summary"])
    for key in ("target_energy_per_site", "delta_e_percent", "final_fidelity", "mps_fidelity_ledger",
                "mps_fidelity_overlap"):
        value = out["results"].get(key)
        if value is not None:
            print(f"  {key:<24}{value:.10g}")
    print(f"wrote {outdir}/trace.csv, energy_report.csv, run_metadata.json ({wall:.2f} s)")
    return EXIT_OK


# ----------------------------------------------------------------------- sweep


def parse_grid(spec: str) -> list[float]:
    """``a:b:n`` for n evenly spaced points, or a comma list."""
    try:
        if ":" in spec:
            a, b, n = spec.split(":")
            return [float(x) for x in np.linspace(float(a), float(b), int(n))]
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {spec!r}") from None


PLOT_SCRIPT = '''import csv
import matplotlib.pyplot as plt
import numpy as np

rows = list(csv.DictReader(open("sweep.csv")))
Ts = sorted({float(r["T"]) for r in rows})
dts = sorted({float(r["dt"]) for r in rows})
grid = np.full((len(dts), len(Ts)), np.nan)
for r in rows:
    if r["delta_e_percent"] and r["discarded"] == "0":
        grid[dts.index(float(r["dt"])), Ts.index(float(r["T"]))] = float(r["delta_e_percent"])
fig, ax = plt.subplots()
mesh = ax.pcolormesh(Ts, dts, grid, shading="nearest", cmap="viridis")
ax.contour(Ts, dts, grid, levels=[1, 10], colors="white")
ax.set_xlabel("T")
ax.set_ylabel("dt")
fig.colorbar(mesh, label="delta E (%)")
fig.savefig("sweep.png", dpi=150)
'''


def cmd_sweep(cfg: RunConfig) -> int:
    lattice = build_lattice(LatticeSpec(cfg.nx, cfg.ny))
    check_capacity(cfg, lattice.n_qubits)
    if lattice.n_qubits > DEFAULT_QUBIT_CAP:
        raise CapacityError("sweeps need an exact target energy; lattice too large")
    Ts, dts = parse_grid(cfg.T_grid), parse_grid(cfg.dt_grid)
    if not Ts or not dts:
        raise ConfigError("empty sweep grid")
    backend = cfg.backend if cfg.backend in ("sv", "mps") else "sv"
    points = sweep(lattice, cfg.schedule, Ts, dts, backend=backend, chi_max=cfg.chi, workers=cfg.workers or None)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "sweep.csv").write_text(sweep_csv(points))
    (outdir / "plot_sweep.py").write_text(PLOT_SCRIPT)
    failed = [p for p in points if p.error]
    print(f"{len(points)} grid points, {len(failed)} failed; wrote {outdir}/sweep.csv and plot_sweep.py")
    for p in failed:
        print(f"  T={p.T:g} dt={p.dt:g}: {p.error}")
    return EXIT_OK


# ----------------------------------------------------------------------- bench

REFERENCE_ROWS = [
    # lattice, qubits, E0, ED, SV, MPS, fidelity, chi
    ((1, 1), 12, -1.2083, -1.2125, -1.2118, -1.2119, 1.000, 64),
    ((2, 1), 20, -1.2433, -1.2474, -1.2466, -1.2467, 1.000, 512),
    ((1, 3), 28, -1.2641, None, -1.2674, -1.2675, 1.000, 512),
    ((3, 1), 28, -1.2545, None, -1.2577, -1.2571, 0.997, 1536),
    ((2, 2), 32, -1.2815, None, -1.2847, -1.2842, 0.994, 1512),
    ((1, 4), 36, -1.2746, None, None, -1.2778, 1.000, 512),
    ((4, 1), 36, -1.2509, None, None, -1.2445, 0.920, 1000),
]
DESK_QUBITS = 20
DESK_MPS_QUBITS = 12


def _bench_line(label: str, column: str, ref, value) -> str:
    if value is None:
        return f"{label:<6}{column:<6}{'' if ref is None else f'{ref: .4f}':>10}{'skipped':>12}"
    diff = "" if ref is None else f"{abs(ref - value):.2e}"
    return f"{label:<6}{column:<6}{'' if ref is None else f'{ref: .4f}':>10}{value:>12.5f}{diff:>11}"


def bench_energies(large: bool, budget: float) -> list[str]:
    lines = [f"{'size':<6}{'col':<6}{'reference':>10}{'computed':>12}{'|diff|':>11}"]
    for (nx, ny), nq, e0, ed, sv, mps, fid, chi in REFERENCE_ROWS:
        if nq > DESK_QUBITS and not large:
            continue
        lattice = build_lattice((nx, ny))
        sched = Schedule(T=1.0, N=40, U_final=0.5)
        label = f"{nx}x{ny}"
        dense = lattice.n_qubits <= DEFAULT_QUBIT_CAP
        problem = build_problem(lattice, sched, reference=dense)
        groups = build_groups(lattice) if not dense else None
        if dense:
            lines.append(_bench_line(label, "E0", e0, problem.initial_energy / lattice.n_sites))
            lines.append(_bench_line(label, "ED", ed, problem.target_energy / lattice.n_sites))
        else:
            st = prepare(givens_compile(occupied_orbitals(quadratic_matrix(lattice))), "mps", chi)
            e = total_energy(st, groups, lattice, sched.final).per_site
            lines.append(_bench_line(label, "E0", e0, e))
            lines.append(_bench_line(label, "ED", ed, None))
        sv_state = None
        if estimate_bytes(lattice.n_qubits, "sv", 1) <= budget:
            tr = evolve_circuit(problem, record_every=sched.N)
            sv_state = tr.final_state
            lines.append(_bench_line(label, "SV", sv, tr.final.energy_per_site))
        else:
            lines.append(_bench_line(label, "SV", sv, None))
        if lattice.n_qubits <= DESK_MPS_QUBITS or large:
            tr = evolve_circuit(problem, backend="mps", chi_max=chi, record_every=sched.N)
            lines.append(_bench_line(label, "MPS", mps, tr.final.energy_per_site))
            f = fidelity(tr.final_state, sv_state) if sv_state is not None else tr.final_state.fidelity_ledger
            lines.append(_bench_line(label, "F", fid, f))
        else:
            lines.append(_bench_line(label, "MPS", mps, None))
    return lines


def bench_chi_scan(chis=(64, 48, 32, 24, 16, 12, 8, 4, 2)) -> list[str]:
    lattice = build_lattice((1, 1))
    sched = Schedule(T=1.0, N=40, U_final=0.5)
    problem = build_problem(lattice, sched, reference=False)
    ref = evolve_circuit(problem, record_every=sched.N).final_state
    lines = [f"{'chi':>5}{'overlap F':>14}{'ledger F':>14}{'E/site':>12}"]
    for chi in chis:
        tr = evolve_circuit(problem, backend="mps", chi_max=chi, record_every=sched.N)
        st = tr.final_state
        lines.append(f"{chi:>5}{fidelity(st, ref):>14.6f}{st.fidelity_ledger:>14.6f}{tr.final.energy_per_site:>12.5f}")
    return lines


# ------------------------------------------------------------ plan / prep tools


def cmd_compile_plan(nx: int, ny: int, part: str) -> int:
    lattice = build_lattice((nx, ny))
    plan = compile_step(lattice, part)
    print(export_schedule(plan, lattice))
    rep = verify_plan(plan, lattice)
    print(f"# {part}: {len(plan.interactions)} interactions, {plan.swap_count} fswaps, depth {plan.depth}, "
          f"identity={rep.identity}, missing={len(rep.missing)}, duplicates={len(rep.duplicates)}")
    return EXIT_OK if rep.ok else EXIT_NUMERIC


def prep_diagnostics(nx: int, ny: int, t: float, lam: float, include_zero_modes: bool = False) -> tuple[list[str], bool]:
    lattice = build_lattice((nx, ny))
    basis = occupied_orbitals(quadratic_matrix(lattice, t, lam), include_zero_modes)
    circuit = givens_compile(basis)
    nq = lattice.n_qubits
    lines = [
        f"lattice {nx}x{ny}: {nq} modes, {len(basis.occupied)} occupied",
        "orbital energies: " + " ".join(f"{e:.6f}" for e in basis.energies),
        f"givens rotations {len(circuit.rotations)} (bound {nq * len(basis.occupied)}), depth {circuit.depth}",
        f"sum of occupied energies {basis.ground_energy:.12f}",
    ]
    ok = len(circuit.rotations) <= nq * max(1, len(basis.occupied))
    if nq <= DEFAULT_QUBIT_CAP:
        state = prepare(circuit)
        h = build_hamiltonian(lattice, Couplings(t, 0.0, lam), ("hop", "so"), n_particles=len(basis.occupied))
        v = h.restrict(state.to_dense())
        hv = h.matrix @ v
        energy = float(np.vdot(v, hv).real)
        variance = float(np.vdot(hv, hv).real) - energy**2
        e_ed, g = ground_state_ed(h)
        fid = float(abs(np.vdot(g, v)) ** 2)
        lines += [f"prepared energy {energy:.12f}", f"energy variance {variance:.3e}",
                  f"fidelity with exact ground state {fid:.12f} (ED energy {e_ed:.12f})"]
        ok &= abs(energy - basis.ground_energy) < 1e-9 and variance < 1e-8
    return lines, ok


# ------------------------------------------------------------------------ main


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--U", type=float, help="final on-site coupling")
    p.add_argument("--lam", type=float, help="final spin-orbit coupling")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--T", type=float, help="total evolution time")
    p.add_argument("--N", type=int, help="number of Trotter steps")
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--chi", type=int, help="MPS maximum bond dimension")
    p.add_argument("--precision", choices=("double", "single"))
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", type=int, help="sampled readout (0 = exact probabilities)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--memory-gb", dest="memory_gb", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agsim", description="Adiabatic Hubbard simulations on honeycomb lattices")
    parser.add_argument("--version", action="version", version=f"agsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="prepare, evolve and measure one configuration")
    _add_run_flags(run)

    sw = sub.add_parser("sweep", help="delta E over a (T, dt) grid")
    _add_run_flags(sw)
    sw.add_argument("--T-grid", dest="T_grid", help="a:b:n or comma list")
    sw.add_argument("--dt-grid", dest="dt_grid", help="a:b:n or comma list")
    sw.add_argument("--workers", type=int)

    bench = sub.add_parser("bench", help="compare against published reference values")
    bench.add_argument("preset", help="table2 or fig7")
    bench.add_argument("--large", action="store_true", help="include rows beyond desk scale")
    bench.add_argument("--memory-gb", dest="memory_gb", type=float, default=0.0)

    cp = sub.add_parser("compile-plan", help="print a swap-network schedule")
    cp.add_argument("--nx", type=int, default=1)
    cp.add_argument("--ny", type=int, default=2)
    cp.add_argument("--part", choices=KINDS, default="hop")

    pc = sub.add_parser("prep-check", help="Gaussian state preparation diagnostics")
    pc.add_argument("--nx", type=int, default=1)
    pc.add_argument("--ny", type=int, default=1)
    pc.add_argument("--t", type=float, default=1.0)
    pc.add_argument("--lam", type=float, default=0.0)
    pc.add_argument("--include-zero-modes", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "run":
            return cmd_run(resolve_config(args))
        if args.command == "sweep":
            return cmd_sweep(resolve_config(args))
        if args.command == "bench":
            budget = RunConfig(memory_gb=args.memory_gb).memory_budget
            if args.preset == "table2":
                lines = bench_energies(args.large, budget)
            elif args.preset == "fig7":
                lines = bench_chi_scan()
            else:
                raise ConfigError(f"unknown bench preset {args.preset!r}; use table2 or fig7")
            print("\n".join(lines))
            return EXIT_OK
        if args.command == "compile-plan":
            if args.nx < 1 or args.ny < 1:
                raise ConfigError("nx and ny must be >= 1")
            return cmd_compile_plan(args.nx, args.ny, args.part)
        if args.command == "prep-check":
            if args.nx < 1 or args.ny < 1:
                raise ConfigError("nx and ny must be >= 1")
            lines, ok = prep_diagnostics(args.nx, args.ny, args.t, args.lam, args.include_zero_modes)
            print("\n".join(lines))
            return EXIT_OK if ok else EXIT_NUMERIC
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (NumericalCheckError, CompileError) as exc:
        print(f"numerical check failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
