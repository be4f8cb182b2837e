"""Energy readout in seventeen commuting groups.

One group reads the on-site interaction directly from ``P11`` of every site
pair.  The remaining sixteen split the bonds into four matchings (two
horizontal by column parity, two vertical by row parity), times two spins,
times hopping or spin-flip.  Each group is routed with fermionic swaps so
that its pairs sit next to each other.  A phase gate then makes each pair
coupling real, and the diagonalizer maps ``|10><01| + h.c.`` onto
``P10 - P01``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .fermion import Couplings, hopping_coefficient
from .gates import Gate, diagonalizer, fswap, format_gate_list, so_prerotation
from .lattice import Lattice, Orientation, Spin
from .sim import MpsState, StateVector

GEOMETRIC_SETS = ("H0", "H1", "V0", "V1")
N_GROUPS = 17


class CoverageError(RuntimeError):
    pass


@dataclass(frozen=True)
class PairTerm:
    labels: tuple[int, int]  # (upper, lower) logical modes after routing
    positions: tuple[int, int]
    edge: tuple[int, int]


@dataclass(frozen=True)
class MeasurementGroup:
    label: str
    kind: str  # "coulomb", "hop" or "so"
    routing: tuple[tuple[tuple[int, int], ...], ...] = ()  # fswap layers
    terms: tuple[PairTerm, ...] = ()

    def coefficient(self, lattice: Lattice, couplings: Couplings, term: PairTerm) -> complex:
        if self.kind == "coulomb":
            return couplings.U
        return complex(hopping_coefficient(lattice, term.labels[0], term.labels[1], couplings))

    def circuit(self, lattice: Lattice, couplings: Couplings) -> list[Gate]:
        """Pre-measurement gates in application order."""
        gates = [fswap().on(p, q) for layer in self.routing for p, q in layer]
        if self.kind == "coulomb":
            return gates
        d = diagonalizer()
        for term in self.terms:
            c = self.coefficient(lattice, couplings, term)
            p = term.positions[0]
            if abs(c) > 0 and abs(np.angle(c)) > 0:
                gates.append(so_prerotation(float(np.angle(c))).on(p))
            gates.append(d.on(p, p + 1))
        return gates

    def export(self, lattice: Lattice, couplings: Couplings) -> str:
        return f"# group {self.label}\n" + format_gate_list(self.circuit(lattice, couplings))


@dataclass
class EnergyReport:
    groups: dict[str, float]
    n_sites: int
    shots: int | None = None
    measurement_fidelity: float = 1.0
    e_hop: float = field(init=False)
    e_coulomb: float = field(init=False)
    e_so: float = field(init=False)

    def __post_init__(self):
        self.e_coulomb = sum(v for k, v in self.groups.items() if k == "coulomb")
        self.e_hop = sum(v for k, v in self.groups.items() if k.endswith("-hop"))
        self.e_so = sum(v for k, v in self.groups.items() if k.endswith("-so"))

    @property
    def total(self) -> float:
        return self.e_hop + self.e_coulomb + self.e_so

    @property
    def per_site(self) -> float:
        return self.total / self.n_sites

    def rows(self) -> list[tuple[str, float]]:
        out = list(self.groups.items())
        out += [("E_H", self.e_hop), ("E_C", self.e_coulomb), ("E_SO", self.e_so),
                ("total", self.total), ("per_site", self.per_site)]
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["group", "value"])
        for name, value in self.rows():
            writer.writerow([name, f"{value:.17g}"])
        return buf.getvalue()

    def summary(self) -> str:
        mode = "exact probabilities" if self.shots is None else f"{self.shots} shots per group"
        lines = [
            f"energy report ({mode}, {len(self.groups)} groups)",
            f"  hopping       {self.e_hop: .10f}",
            f"  on-site       {self.e_coulomb: .10f}",
            f"  spin-orbit    {self.e_so: .10f}",
            f"  total         {self.total: .10f}",
            f"  per site      {self.per_site: .10f}",
        ]
        if self.measurement_fidelity < 1.0:
            lines.append(f"  routing fidelity (MPS truncation) {self.measurement_fidelity:.6f}")
        return "\n".join(lines)


def geometric_set(lattice: Lattice, edge) -> str:
    if edge.orientation is Orientation.HORIZONTAL:
        left = min(lattice.sites[edge.a].col, lattice.sites[edge.b].col)
        return f"H{left % 2}"
    return f"V{edge.row % 2}"


def _target_order(n: int, partner: dict[int, int]) -> list[int]:
    # walk the chain and pull each partner in right behind the first member met
    order, placed = [], set()
    for label in range(n):
        if label in placed:
            continue
        order.append(label)
        placed.add(label)
        other = partner.get(label)
        if other is not None and other not in placed:
            order.append(other)
            placed.add(other)
    return order


def _transposition_sort(order: list[int]) -> list[tuple[tuple[int, int], ...]]:
    """Odd-even transposition layers taking the identity chain to ``order``."""
    rank = {label: k for k, label in enumerate(order)}
    arr = list(range(len(order)))
    layers, idle, parity = [], 0, 0
    while idle < 2:
        layer = []
        for k in range(parity, len(arr) - 1, 2):
            if rank[arr[k]] > rank[arr[k + 1]]:
                arr[k], arr[k + 1] = arr[k + 1], arr[k]
                layer.append((k, k + 1))
        if layer:
            layers.append(tuple(layer))
            idle = 0
        else:
            idle += 1
        parity ^= 1
    assert arr == order
    return layers


def _routed_group(label: str, kind: str, n: int, pairs: list[tuple[int, int, tuple[int, int]]]) -> MeasurementGroup:
    partner = {}
    for a, b, _ in pairs:
        partner[a], partner[b] = b, a
    order = _target_order(n, partner)
    routing = _transposition_sort(order)
    where = {label_: k for k, label_ in enumerate(order)}
    terms = []
    for a, b, edge in pairs:
        pa, pb = where[a], where[b]
        upper, lower = (a, b) if pa < pb else (b, a)
        p = min(pa, pb)
        assert abs(pa - pb) == 1
        terms.append(PairTerm((upper, lower), (p, p + 1), edge))
    terms.sort(key=lambda t: t.positions)
    return MeasurementGroup(label, kind, tuple(routing), tuple(terms))


def build_groups(lattice: Lattice) -> list[MeasurementGroup]:
    qmap = lattice.qubit_map
    n = lattice.n_qubits
    coulomb = MeasurementGroup(
        "coulomb", "coulomb", (),
        tuple(PairTerm((2 * s.index, 2 * s.index + 1), (2 * s.index, 2 * s.index + 1), (s.index, s.index))
              for s in lattice.sites),
    )
    groups = [coulomb]
    by_set: dict[str, list] = {name: [] for name in GEOMETRIC_SETS}
    for e in lattice.edges:
        by_set[geometric_set(lattice, e)].append(e)
    for name in GEOMETRIC_SETS:
        for spin in Spin:
            for kind in ("hop", "so"):
                other = spin if kind == "hop" else spin.flipped
                pairs = [(qmap.qubit(e.a, spin), qmap.qubit(e.b, other), (e.a, e.b)) for e in by_set[name]]
                groups.append(_routed_group(f"{name}-{spin.symbol}-{kind}", kind, n, pairs))
    _audit(lattice, groups)
    return groups


def _audit(lattice: Lattice, groups: list[MeasurementGroup]) -> None:
    from .netcompile import expected_terms

    if len(groups) != N_GROUPS:
        raise CoverageError(f"expected {N_GROUPS} groups, built {len(groups)}")
    for kind in ("coulomb", "hop", "so"):
        seen = [tuple(sorted(t.labels)) for g in groups if g.kind == kind for t in g.terms]
        expected = expected_terms(lattice, kind)
        if len(seen) != len(set(seen)) or set(seen) != expected:
            missing = sorted(expected - set(seen))
            raise CoverageError(f"{kind} terms not covered exactly once; missing {missing}")
    for g in groups:
        used = [p for t in g.terms for p in t.positions]
        if len(used) != len(set(used)):
            raise CoverageError(f"group {g.label} measures overlapping pairs")


# ------------------------------------------------------------------ evaluation


def _pair_distributions(state, pairs: list[tuple[int, int]]) -> list[np.ndarray]:
    if isinstance(state, StateVector):
        probs = np.abs(state.amplitudes) ** 2
        return [probs.reshape(2**p, 4, -1).sum(axis=(0, 2)) for p, _ in pairs]
    return [state.probabilities([p, q]) for p, q in pairs]


def _sampled_distributions(state, pairs, shots: int, rng: np.random.Generator) -> list[np.ndarray]:
    counts = state.sample(shots, rng)
    out = []
    for p, q in pairs:
        dist = np.zeros(4)
        for bits, c in counts.items():
            dist[2 * int(bits[p]) + int(bits[q])] += c
        out.append(dist / shots)
    return out


def _measurement_copy(state, chi_max: int | None):
    out = state.copy()
    if isinstance(out, MpsState):
        out.chi_max = chi_max or max(4 * state.chi_max, 2 ** min(10, state.n_qubits // 2))
        out.fidelity_ledger = 1.0
    return out


def _distributions(group, state, shots, rng):
    pairs = [t.positions for t in group.terms]
    if shots is None:
        return _pair_distributions(state, pairs)
    return _sampled_distributions(state, pairs, shots, rng)


def coulomb_energy(state, group: MeasurementGroup, couplings: Couplings, shots: int | None = None,
                   rng: np.random.Generator | None = None) -> float:
    if group.kind != "coulomb":
        raise ValueError(f"group {group.label} is not the on-site group")
    if couplings.U == 0:
        return 0.0
    dists = _distributions(group, state, shots, rng)
    return float(couplings.U * sum(d[3] for d in dists))


def hopping_group_energy(state, group: MeasurementGroup, lattice: Lattice, couplings: Couplings,
                         shots: int | None = None, rng: np.random.Generator | None = None,
                         chi_max: int | None = None) -> tuple[float, float]:
    """Energy of one bond group and the MPS routing fidelity (1 for statevectors)."""
    if group.kind not in ("hop", "so"):
        raise ValueError(f"group {group.label} is not a bond group")
    coeffs = [group.coefficient(lattice, couplings, t) for t in group.terms]
    if not any(abs(c) > 0 for c in coeffs):
        return 0.0, 1.0
    work = _measurement_copy(state, chi_max)
    work.apply_fswap_layers(group.routing)
    d = diagonalizer().matrix
    for term, c in zip(group.terms, coeffs):
        p = term.positions[0]
        if abs(c) > 0 and abs(np.angle(c)) > 0:
            work.apply_single_qubit(so_prerotation(float(np.angle(c))).matrix, p)
        work.apply_two_qubit(d, p, p + 1)
    dists = _distributions(group, work, shots, rng)
    energy = sum(abs(c) * (dist[2] - dist[1]) for c, dist in zip(coeffs, dists))
    fid = work.fidelity_ledger if isinstance(work, MpsState) else 1.0
    return float(energy), fid


def total_energy(state, groups: list[MeasurementGroup], lattice: Lattice, couplings: Couplings,
                 shots: int | None = None, seed: int | None = None, chi_max: int | None = None) -> EnergyReport:
    rng = np.random.default_rng(seed) if shots is not None else None
    values: dict[str, float] = {}
    fidelity = 1.0
    for g in groups:
        if g.kind == "coulomb":
            values[g.label] = coulomb_energy(state, g, couplings, shots, rng)
        else:
            values[g.label], fid = hopping_group_energy(state, g, lattice, couplings, shots, rng, chi_max)
            fidelity = min(fidelity, fid)
    return EnergyReport(values, lattice.n_sites, shots, fidelity)
